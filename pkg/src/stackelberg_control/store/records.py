"""
CSV emission shared by every subcommand.
"""
import csv
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .config import StoreConfig


def format_value(value, float_format: str = StoreConfig.FLOAT_FORMAT) -> str:
    """Floats with 17 significant digits, everything else via str"""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), float_format)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """
    Write a headed CSV file (UTF-8, LF line endings)

    Args:
        path: Destination file
        header: Column names, mandatory
        rows: Row sequences matching the header
    """
    if not header:
        raise ValueError("CSV header is mandatory")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding=StoreConfig.ENCODING, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} values, header has {len(header)}")
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path: Union[str, Path]) -> list:
    """Rows of a CSV written by write_csv, header first"""
    with Path(path).open(encoding=StoreConfig.ENCODING, newline="") as fh:
        return list(csv.reader(fh))
