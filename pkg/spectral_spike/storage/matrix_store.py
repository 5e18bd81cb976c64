"""
Data-matrix persistence: CSV and the SPKY binary container.

CSV   one matrix row per line, comma-separated decimal floats, no header.
SPKY  b"SPKY" | u32 LE version=1 | u64 LE N | u64 LE M | N·M f64 LE, row-major.
"""
import csv
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from spectral_spike.errors import DataIOError, MalformedDataError

logger = logging.getLogger(__name__)

DataFormat = Literal["csv", "binary"]

MAGIC = b"SPKY"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class DataMatrix:
    """N×M real data matrix Y (rows are dimensions, columns are samples)."""

    entries: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.entries, dtype=np.float64)
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise MalformedDataError(f"data matrix must be a non-empty 2-D array, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            bad_row, bad_col = np.argwhere(~np.isfinite(y))[0]
            raise MalformedDataError("non-finite entry", row=int(bad_row) + 1, column=int(bad_col) + 1)
        y.setflags(write=False)
        object.__setattr__(self, "entries", y)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def ratio(self) -> float:
        """c_N = N / M."""
        return self.rows / self.cols


# ──────────────────────────────────────────────────────────────────────────────
# Loading
# ──────────────────────────────────────────────────────────────────────────────
def _parse_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for line_no, record in enumerate(csv.reader(fh), start=1):
                if not record or all(not cell.strip() for cell in record):
                    continue
                values = []
                for col_no, cell in enumerate(record, start=1):
                    try:
                        value = float(cell)
                    except ValueError:
                        raise MalformedDataError(f"cannot parse {cell.strip()!r} as a float", row=line_no, column=col_no)
                    if not math.isfinite(value):
                        raise MalformedDataError("non-finite entry", row=line_no, column=col_no)
                    values.append(value)
                if width is None:
                    width = len(values)
                elif len(values) != width:
                    raise MalformedDataError(f"expected {width} columns, found {len(values)}", row=line_no)
                rows.append(values)
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e
    if not rows:
        raise MalformedDataError(f"{path} contains no data rows")
    return np.array(rows, dtype=np.float64)


def _parse_binary(path: Path) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e
    if len(raw) < _HEADER.size:
        raise MalformedDataError(f"{path} is shorter than the {_HEADER.size}-byte header")
    magic, version, n, m = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MalformedDataError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise MalformedDataError(f"unsupported version {version}")
    if n < 1 or m < 1:
        raise MalformedDataError(f"invalid dimensions N={n}, M={m}")
    expected = _HEADER.size + 8 * n * m
    if len(raw) != expected:
        raise MalformedDataError(f"payload holds {len(raw) - _HEADER.size} bytes, expected {8 * n * m}")
    y = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, m).astype(np.float64)
    finite = np.isfinite(y)
    if not finite.all():
        bad_row, bad_col = np.argwhere(~finite)[0]
        raise MalformedDataError("non-finite entry", row=int(bad_row) + 1, column=int(bad_col) + 1)
    return y


def load_data(path: str | Path, format: DataFormat = "binary") -> DataMatrix:
    """
    Read a data matrix from disk.

    Args:
        path (str | Path): File to read.
        format (str): ``"csv"`` or ``"binary"``.

    Raises:
        DataIOError: The file cannot be opened.
        MalformedDataError: The content does not parse; names the offending row/column (1-based).

    Returns:
        DataMatrix: N = row count, M = column count.
    """
    path = Path(path)
    if not path.exists():
        raise DataIOError(f"no such file: {path}")
    if format == "csv":
        y = _parse_csv(path)
    elif format == "binary":
        y = _parse_binary(path)
    else:
        raise MalformedDataError(f"unknown data format {format!r}")
    logger.info(f"📂 Loaded {y.shape[0]}×{y.shape[1]} matrix from {path}")
    return DataMatrix(y)


# ──────────────────────────────────────────────────────────────────────────────
# Saving
# ──────────────────────────────────────────────────────────────────────────────
def save_data(data: DataMatrix, path: str | Path, format: DataFormat = "binary") -> Path:
    """Write ``data`` to ``path``; the binary container round-trips bit-exactly."""
    path = Path(path)
    try:
        if format == "binary":
            header = _HEADER.pack(MAGIC, VERSION, data.rows, data.cols)
            payload = np.ascontiguousarray(data.entries, dtype="<f8").tobytes()
            path.write_bytes(header + payload)
        elif format == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                for row in data.entries:
                    writer.writerow([repr(float(v)) for v in row])
        else:
            raise MalformedDataError(f"unknown data format {format!r}")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
    logger.info(f"💾 Saved {data.rows}×{data.cols} matrix to {path} ({format})")
    return path
