"""Reading and writing dense matrices.

Two formats:

* ``csv`` -- comma separated, one row per line, no header.
* ``spbd`` -- binary: magic ``b"SPBD"``, little-endian ``u32`` version (1),
  ``u64`` rows, ``u64`` cols, then ``rows * cols`` little-endian float64
  values in row-major order. Round trips are bit exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "MatrixFileError",
    "MatrixParseError",
    "NonFiniteMatrixError",
    "MatrixShapeError",
    "infer_format",
    "load_matrix",
    "save_matrix",
]

MAGIC = b"SPBD"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class MatrixFileError(ValueError):
    pass


class MatrixParseError(MatrixFileError):
    pass


class NonFiniteMatrixError(MatrixFileError):
    pass


class MatrixShapeError(MatrixFileError):
    pass


def infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".spbd", ".bin"):
        return "spbd"
    raise MatrixFileError(f"cannot infer matrix format from {path!s}; use .csv or .spbd")


def _parse_csv(text: str, path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(field) for field in line.split(",")])
        except ValueError as exc:
            raise MatrixParseError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise MatrixParseError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise MatrixShapeError(f"{path}: ragged rows with widths {sorted(widths)}")
    return np.array(rows, dtype=float)


def _parse_binary(blob: bytes, path) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise MatrixParseError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise MatrixParseError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MatrixParseError(f"{path}: unsupported version {version}")
    payload = blob[_HEADER.size:]
    if len(payload) != 8 * rows * cols:
        raise MatrixShapeError(
            f"{path}: header declares {rows}x{cols} but payload holds {len(payload) // 8} values"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)


def load_matrix(path, format: str | None = None, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Load a dense matrix; ``shape``, if given, must match what the file holds."""
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt == "csv":
        matrix = _parse_csv(path.read_text(), path)
    elif fmt == "spbd":
        matrix = _parse_binary(path.read_bytes(), path)
    else:
        raise MatrixFileError(f"unknown matrix format {fmt!r}")
    if matrix.size == 0:
        raise MatrixShapeError(f"{path}: empty matrix")
    if shape is not None and tuple(matrix.shape) != tuple(shape):
        raise MatrixShapeError(f"{path}: expected shape {tuple(shape)}, file holds {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteMatrixError(f"{path}: matrix has non-finite entries")
    return matrix


def save_matrix(matrix, path, format: str | None = None) -> None:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise MatrixShapeError(f"expected a 2-D matrix, got shape {matrix.shape}")
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt == "csv":
        lines = (",".join(repr(float(v)) for v in row) for row in matrix)
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "spbd":
        rows, cols = matrix.shape
        header = _HEADER.pack(MAGIC, VERSION, rows, cols)
        path.write_bytes(header + np.ascontiguousarray(matrix, dtype="<f8").tobytes())
    else:
        raise MatrixFileError(f"unknown matrix format {fmt!r}")
