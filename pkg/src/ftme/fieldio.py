"""Rectangular grids, scalar fields and deterministic CSV/PGM export.

CSV carries full 64-bit precision (17 significant digits) and round-trips
bit-exactly; PGM is binary 8-bit grayscale written byte-identically across
runs, with image row 0 at maximum y.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np


class FieldIOError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid2D:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid bounds must satisfy max > min")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("node counts must be >= 2")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def node(self, i: int, j: int) -> tuple[float, float]:
        return (self.xs[i], self.ys[j])

    def nodes(self) -> np.ndarray:
        """All nodes, row-major over (i, j), shape (nx*ny, 2)."""
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])


@dataclass(frozen=True)
class ScalarField2D:
    """Grid-sampled scalar values with a validity mask (True = valid)."""

    grid: Grid2D
    values: np.ndarray
    mask: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        shape = (self.grid.nx, self.grid.ny)
        values = np.asarray(self.values, dtype=float).reshape(shape)
        mask = np.asarray(self.mask, dtype=bool).reshape(shape)
        if not np.isfinite(values[mask]).all():
            raise ValueError("values must be finite wherever mask is true")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    def valid_min(self) -> float:
        return float(self.values[self.mask].min())

    def valid_max(self) -> float:
        return float(self.values[self.mask].max())


def _fmt(v: float) -> str:
    return format(v, ".17g")


def export_csv(field: ScalarField2D, path) -> None:
    """Write `x,y,value,valid` rows, one per node in row-major order.

    Masked nodes get valid=0 and the field's valid maximum as the value so
    downstream color scales are not skewed.
    """
    g = field.grid
    fill = field.valid_max() if field.mask.any() else 0.0
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("x,y,value,valid\n")
            xs, ys = g.xs, g.ys
            for i in range(g.nx):
                for j in range(g.ny):
                    ok = field.mask[i, j]
                    v = field.values[i, j] if ok else fill
                    fh.write(f"{_fmt(xs[i])},{_fmt(ys[j])},{_fmt(v)},"
                             f"{1 if ok else 0}\n")
    except OSError as exc:
        raise FieldIOError(f"cannot write CSV to {path}: {exc}") from exc


def import_csv(path) -> ScalarField2D:
    """Rebuild a field from export_csv output."""
    try:
        with open(path, "r") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FieldIOError(f"cannot read CSV from {path}: {exc}") from exc
    if not lines or lines[0] != "x,y,value,valid":
        raise FieldIOError(f"{path}: missing or malformed header")
    xs, ys, vals, valid = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise FieldIOError(f"{path}:{lineno}: expected 4 fields")
        try:
            xs.append(float(parts[0]))
            ys.append(float(parts[1]))
            vals.append(float(parts[2]))
            valid.append(bool(int(parts[3])))
        except ValueError as exc:
            raise FieldIOError(f"{path}:{lineno}: {exc}") from exc
    xs = np.array(xs)
    ys = np.array(ys)
    # row-major: y varies fastest; ny = length of the first constant-x block
    ny = 1
    while ny < len(xs) and xs[ny] == xs[0]:
        ny += 1
    if ny < 2 or len(xs) % ny != 0:
        raise FieldIOError(f"{path}: ragged or non-grid data")
    nx = len(xs) // ny
    grid = Grid2D(x_min=float(xs[0]), x_max=float(xs[-1]),
                  y_min=float(ys[0]), y_max=float(ys[ny - 1]),
                  nx=nx, ny=ny)
    expect = grid.nodes()
    got = np.column_stack([xs, ys])
    if not np.array_equal(expect, got):
        raise FieldIOError(f"{path}: node coordinates are not a regular grid")
    return ScalarField2D(grid=grid,
                         values=np.array(vals).reshape(nx, ny),
                         mask=np.array(valid).reshape(nx, ny))


def export_pgm(field: ScalarField2D, path, clip: tuple[float, float] | None = None) -> None:
    """Binary PGM (P5), 8-bit, [lo, hi] mapped linearly onto [0, 255].

    lo/hi default to the valid-node min/max; a constant field widens the
    window symmetrically so every pixel maps to 128.  Masked nodes render
    black.  Image row 0 is the maximum-y grid row.
    """
    if clip is not None:
        lo, hi = float(clip[0]), float(clip[1])
        if hi <= lo:
            raise ValueError("clip must satisfy hi > lo")
    else:
        if field.mask.any():
            lo, hi = field.valid_min(), field.valid_max()
        else:
            lo, hi = 0.0, 1.0
        if hi <= lo:
            lo, hi = lo - 0.5, lo + 0.5
    scaled = np.clip((field.values - lo) / (hi - lo), 0.0, 1.0)
    pix = np.rint(scaled * 255.0).astype(np.uint8)
    pix[~field.mask] = 0
    # values[i, j]: i = x index (column), j = y index; flip y for image rows
    img = pix.T[::-1, :]
    header = f"P5\n{field.grid.nx} {field.grid.ny}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(img.tobytes())
    except OSError as exc:
        raise FieldIOError(f"cannot write PGM to {path}: {exc}") from exc
