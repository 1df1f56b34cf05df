"""Bit-exact file formats for vectors, matrices, and interval matrices.

Vectors: raw little-endian binary64, or hexadecimal-float text one value per
line.  Matrices: a "rows cols" header line followed by row-major
hexadecimal-float entries.  Interval matrices travel as a midpoint file plus
a radius file.  Every format round-trips bit for bit.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .interval import EndpointInterval, format_interval, parse_literal
from .matmul import FpMatrix, IntervalMatrixMR

__all__ = [
    "read_vector_binary",
    "write_vector_binary",
    "read_vector_hex",
    "write_vector_hex",
    "read_matrix",
    "write_matrix",
    "read_interval_matrix",
    "write_interval_matrix",
    "read_intervals_text",
    "write_intervals_text",
]

PathLike = Union[str, Path]


def write_vector_binary(path: PathLike, values) -> None:
    arr = np.asarray(values, dtype="<f8").reshape(-1)
    with open(path, "wb") as fh:
        fh.write(arr.tobytes())


def read_vector_binary(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) % 8:
        raise ValueError(f"{path}: length {len(data)} is not a multiple of 8")
    return np.frombuffer(data, dtype="<f8").astype(np.float64)


def write_vector_hex(path: PathLike, values) -> None:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    with open(path, "w") as fh:
        for v in arr.tolist():
            fh.write(float(v).hex())
            fh.write("\n")


def read_vector_hex(path: PathLike) -> np.ndarray:
    out = []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if s:
                out.append(float.fromhex(s))
    return np.array(out, dtype=np.float64)


def write_matrix(path: PathLike, matrix: FpMatrix) -> None:
    m = matrix if isinstance(matrix, FpMatrix) else FpMatrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{m.rows} {m.cols}\n")
        for row in m.data.tolist():
            fh.write(" ".join(float(v).hex() for v in row))
            fh.write("\n")


def read_matrix(path: PathLike) -> FpMatrix:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad matrix header {header!r}")
        rows, cols = int(header[0]), int(header[1])
        entries = fh.read().split()
    if len(entries) != rows * cols:
        raise ValueError(
            f"{path}: expected {rows * cols} entries, found {len(entries)}"
        )
    data = np.array([float.fromhex(e) for e in entries], dtype=np.float64)
    return FpMatrix(data.reshape(rows, cols))


def write_interval_matrix(mid_path: PathLike, rad_path: PathLike,
                          matrix: IntervalMatrixMR) -> None:
    write_matrix(mid_path, matrix.mid)
    write_matrix(rad_path, matrix.rad)


def read_interval_matrix(mid_path: PathLike, rad_path: PathLike) -> IntervalMatrixMR:
    return IntervalMatrixMR(read_matrix(mid_path), read_matrix(rad_path))


def write_intervals_text(path: PathLike, intervals: Sequence[EndpointInterval]) -> None:
    with open(path, "w") as fh:
        for iv in intervals:
            fh.write(format_interval(iv))
            fh.write("\n")


def read_intervals_text(path: PathLike) -> list:
    """Read one interval literal per line ([lo,hi] or <m;r>)."""
    out = []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if s:
                out.append(parse_literal(s))
    return out
