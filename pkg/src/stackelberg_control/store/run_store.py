import platform
import time
import traceback
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, Optional, Sequence

import numpy as np
import scipy

from ..utils.logger import get_logger
from .config import StoreConfig
from .records import write_csv

logger = get_logger(__name__)


@dataclass
class RunContext:
    """Output directory of one run plus the manifest fields collected along the way"""

    directory: Path
    command: str
    seed: int
    manifest: Dict[str, object] = field(default_factory=dict)
    files: list = field(default_factory=list)

    def write(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = write_csv(self.directory / name, header, rows)
        self.files.append(name)
        return path

    def note(self, key: str, value) -> None:
        self.manifest[key] = value


@contextmanager
def open_run(out_dir, command: str, config_text: str = "", seed: int = 0) -> Iterator[RunContext]:
    """
    Run directory with manifest and config echo written in every case

    Errors propagate after error.txt and the manifest record them.
    """
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    run = RunContext(directory=directory, command=command, seed=seed)
    started = time.perf_counter()
    status = "ok"
    error: Optional[str] = None
    try:
        yield run
    except Exception as e:
        status = "failed"
        error = f"{type(e).__name__}: {e}"
        (directory / StoreConfig.ERROR_FILE).write_text(
            error + "\n\n" + traceback.format_exc(), encoding=StoreConfig.ENCODING
        )
        logger.error("%s failed: %s", command, error)
        raise
    finally:
        (directory / StoreConfig.CONFIG_ECHO).write_text(config_text, encoding=StoreConfig.ENCODING)
        rows = [
            ("command", command),
            ("status", status),
            ("seed", seed),
            ("wall_time_s", time.perf_counter() - started),
            ("python", platform.python_version()),
            ("numpy", np.__version__),
            ("scipy", scipy.__version__),
            ("error", error or ""),
        ]
        rows.extend(sorted(run.manifest.items()))
        rows.append(("files", ";".join(run.files)))
        write_csv(directory / StoreConfig.MANIFEST, ["key", "value"], rows)


def record_failure(out_dir, command: str, error: Exception, config_text: str = "", seed: int = 0) -> None:
    """Manifest, config echo and error.txt for a run that failed before it could start"""
    try:
        with open_run(out_dir, command, config_text, seed):
            raise error
    except type(error):
        pass
