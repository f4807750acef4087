"""Readers for the solver's delimited outputs.

Error tables are whitespace-separated with a header row; field dumps are
``x y u_x u_y p mask`` rows on a uniform sample grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ErrorTable", "FieldDump", "load_table", "load_field_dump"]


@dataclass
class ErrorTable:
    path: str
    columns: list[str]
    data: np.ndarray  # (nrows, ncols)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"{self.path}: no column {name!r} (has {self.columns})")
        return self.data[:, self.columns.index(name)]


def load_table(path) -> ErrorTable:
    with open(path) as fh:
        header = fh.readline().split()
        if not header:
            raise ValueError(f"{path}: empty table")
        body = fh.read()
    if not body.strip():
        raise ValueError(f"{path}: table has no data rows")
    data = np.loadtxt(body.splitlines(), ndmin=2)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: {data.shape[1]} columns vs {len(header)} headers")
    return ErrorTable(str(path), header, data)


@dataclass
class FieldDump:
    x: np.ndarray  # (n, n)
    y: np.ndarray
    u: np.ndarray  # (n, n, 2)
    p: np.ndarray
    mask: np.ndarray  # 1 in the fluid, 0 elsewhere


def load_field_dump(path) -> FieldDump:
    with open(path) as fh:
        header = fh.readline().split()
        if header != ["x", "y", "u_x", "u_y", "p", "mask"]:
            raise ValueError(f"{path}: not a field dump (header {header})")
        data = np.loadtxt(fh)
    n = int(round(np.sqrt(len(data))))
    if n * n != len(data):
        raise ValueError(f"{path}: {len(data)} rows is not a square grid")
    grid = data.reshape(n, n, 6)
    return FieldDump(
        x=grid[..., 0],
        y=grid[..., 1],
        u=grid[..., 2:4],
        p=grid[..., 4],
        mask=grid[..., 5].astype(int),
    )


def velocity_difference(a: FieldDump, b: FieldDump) -> np.ndarray:
    """Pointwise |u_a - u_b|; zero outside the common fluid mask."""
    if a.u.shape != b.u.shape:
        raise ValueError(f"field dumps have different shapes {a.u.shape} vs {b.u.shape}")
    if not np.array_equal(a.mask, b.mask):
        raise ValueError("field dumps have different fluid masks")
    diff = np.hypot(a.u[..., 0] - b.u[..., 0], a.u[..., 1] - b.u[..., 1])
    return np.where(a.mask == 1, diff, 0.0)


def pressure_difference(a: FieldDump, b: FieldDump) -> np.ndarray:
    if a.p.shape != b.p.shape or not np.array_equal(a.mask, b.mask):
        raise ValueError("field dumps are not comparable")
    return np.where(a.mask == 1, np.abs(a.p - b.p), 0.0)
