import numpy as np
import pytest

from stackelberg_control.store import StoreConfig, format_value, open_run, read_csv, write_csv


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.float64(2.5)) == "2.5"
    assert format_value(True) == "true"
    assert format_value(np.bool_(False)) == "false"
    assert format_value(np.int64(7)) == "7"
    assert format_value("nash") == "nash"


def test_write_csv_uses_lf_and_a_header(tmp_path):
    path = write_csv(tmp_path / "sub" / "a.csv", ["t", "y"], [(0.0, 1.0), (0.5, 0.25)])
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    assert raw.decode("utf-8") == "t,y\n0,1\n0.5,0.25\n"
    assert read_csv(path) == [["t", "y"], ["0", "1"], ["0.5", "0.25"]]


def test_write_csv_rejects_bad_shapes(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "a.csv", [], [])
    with pytest.raises(ValueError):
        write_csv(tmp_path / "b.csv", ["t", "y"], [(0.0,)])


def test_open_run_writes_manifest_and_config_echo(tmp_path):
    with open_run(tmp_path / "run", "simulate", config_text="[geometry]\n", seed=3) as run:
        run.write("summary.csv", ["key", "value"], [("terminal_norm", 0.5)])
        run.note("lambda", 2.25)
    directory = tmp_path / "run"
    manifest = dict(read_csv(directory / StoreConfig.MANIFEST)[1:])
    assert manifest["command"] == "simulate"
    assert manifest["status"] == "ok"
    assert manifest["seed"] == "3"
    assert manifest["lambda"] == "2.25"
    assert manifest["files"] == "summary.csv"
    assert manifest["error"] == ""
    assert float(manifest["wall_time_s"]) >= 0.0
    assert (directory / StoreConfig.CONFIG_ECHO).read_text() == "[geometry]\n"
    assert not (directory / StoreConfig.ERROR_FILE).exists()


def test_open_run_records_failures(tmp_path):
    with pytest.raises(RuntimeError):
        with open_run(tmp_path, "nash") as run:
            run.write("partial.csv", ["k"], [(1,)])
            raise RuntimeError("stalled")
    manifest = dict(read_csv(tmp_path / StoreConfig.MANIFEST)[1:])
    assert manifest["status"] == "failed"
    assert manifest["error"] == "RuntimeError: stalled"
    assert manifest["files"] == "partial.csv"
    assert (tmp_path / StoreConfig.ERROR_FILE).read_text().startswith("RuntimeError: stalled")
