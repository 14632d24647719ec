"""Uniform cell-centered 1D grids and scalar fields with extension by zero.

Fields live on ``[0, L]`` as cell averages. Point evaluation uses the
piecewise-constant reconstruction and returns 0 outside the closed domain,
which is the convention every nonlocal operator in this package consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered mesh over ``[0, length]`` with ``n_cells`` cells."""

    length: float
    n_cells: int

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @cached_property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h


def make_grid(length: float, n_cells: int) -> Grid1D:
    """Build a grid, rejecting degenerate sizes.

    Cell centers sit at ``x_i = (i + 1/2) h`` with ``h = length / n_cells``.
    """
    if not np.isfinite(length) or length <= 0.0:
        raise ConfigurationError(f"domain length must be positive, got {length}")
    if n_cells < 4:
        raise ConfigurationError(f"need at least 4 cells, got {n_cells}")
    return Grid1D(float(length), int(n_cells))


@dataclass
class ScalarField:
    """Cell-averaged values of a scalar quantity on a :class:`Grid1D`."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise ConfigurationError(
                f"field has {self.values.shape} values for {self.grid.n_cells} cells"
            )
        if not np.isfinite(self.values).all():
            raise ConfigurationError("field values must be finite")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def field_from_function(grid: Grid1D, fn: Callable[[np.ndarray], np.ndarray]) -> ScalarField:
    return ScalarField(grid, np.asarray(fn(grid.centers), dtype=float))


def constant_field(grid: Grid1D, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.n_cells, float(value)))


def cell_index(grid: Grid1D, x: float) -> int:
    """Index of the cell containing ``x`` for ``0 <= x <= L``.

    Ties at cell faces resolve to the left cell; the two boundary points
    belong to the adjacent cell.
    """
    i = int(np.floor(x / grid.h))
    if i > 0 and i * grid.h == x:
        i -= 1
    return min(max(i, 0), grid.n_cells - 1)


def eval_extended(f: ScalarField, x: float) -> float:
    """Piecewise-constant point evaluation with extension by zero outside [0, L]."""
    if x < 0.0 or x > f.grid.length:
        return 0.0
    return float(f.values[cell_index(f.grid, x)])


@dataclass(frozen=True)
class InteriorMask:
    """Cells whose distance to both boundary points exceeds the sensing radius."""

    grid: Grid1D
    radius: float
    flags: np.ndarray = field(compare=False)

    @property
    def indices(self) -> np.ndarray:
        return np.nonzero(self.flags)[0]


def interior_mask(grid: Grid1D, r: float) -> InteriorMask:
    """Flag exactly the cells with ``r < x_i < L - r`` (may be empty)."""
    if r < 0.0:
        raise ConfigurationError(f"radius must be nonnegative, got {r}")
    x = grid.centers
    flags = (x > r) & (x < grid.length - r)
    return InteriorMask(grid, float(r), flags)


def integrate(f: ScalarField) -> float:
    """Midpoint-rule integral over the domain, exact for cell averages."""
    return float(f.grid.h * f.values.sum())
