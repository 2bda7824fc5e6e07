"""Periodic lattices on the torus and nodal fields living on them.

Axis order is always ``(x_1[, x_2][, y])``.  Values are stored as numpy arrays
shaped ``grid.shape``; the flat (serialized) layout is lexicographic with the
first x-axis fastest and the y-axis slowest, i.e. Fortran order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

MIN_CELLS = 8


@dataclass(frozen=True)
class TorusGrid:
    """Uniform node-centred lattice on a product of circles.

    Parameters
    ----------
    cells : tuple of int
        Cells per axis, x-axes first, then the y-axis when ``has_y``.
    has_y : bool
        Whether the last axis is the scalar y variable.
    periods : tuple of float, optional
        Period per axis, default 1 on every axis.
    """

    cells: tuple[int, ...]
    has_y: bool = False
    periods: tuple[float, ...] | None = None

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        object.__setattr__(self, "cells", cells)
        periods = self.periods
        if periods is None:
            periods = (1.0,) * len(cells)
        periods = tuple(float(p) for p in periods)
        object.__setattr__(self, "periods", periods)

        n = len(cells) - int(self.has_y)
        if n not in (1, 2):
            raise ConfigurationError(
                f"space_dims must be 1 or 2, got {n} (cells={cells}, has_y={self.has_y})"
            )
        if len(periods) != len(cells):
            raise ConfigurationError("one period per axis is required")
        if any(c < MIN_CELLS for c in cells):
            raise ConfigurationError(f"every axis needs at least {MIN_CELLS} cells, got {cells}")
        if any(not np.isfinite(p) or p <= 0 for p in periods):
            raise ConfigurationError(f"periods must be positive, got {periods}")

    @property
    def space_dims(self) -> int:
        return len(self.cells) - int(self.has_y)

    @property
    def ndim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(p / c for p, c in zip(self.periods, self.cells))

    def coords(self, axis: int) -> np.ndarray:
        """Node coordinates ``i * h`` along one axis."""
        return np.arange(self.cells[axis]) * self.spacing[axis]

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis (sparse ``ij`` mesh)."""
        return tuple(np.meshgrid(*(self.coords(a) for a in range(self.ndim)),
                                 indexing="ij", sparse=True))

    def split_mesh(self) -> tuple[tuple[np.ndarray, ...], np.ndarray | float]:
        """Return ``(x_coords, y_coord)``; y is ``0.0`` when there is no y-axis."""
        m = self.mesh()
        if self.has_y:
            return m[:-1], m[-1]
        return m, 0.0

    def x_grid(self) -> "TorusGrid":
        """The same lattice with the y-axis dropped."""
        if not self.has_y:
            return self
        return TorusGrid(self.cells[:-1], has_y=False, periods=self.periods[:-1])

    def wrap(self, index) -> tuple[int, ...]:
        """Reduce a multi-index modulo the cell counts."""
        return tuple(int(i) % c for i, c in zip(index, self.cells))

    def refine(self, factor: int) -> "TorusGrid":
        return TorusGrid(tuple(c * factor for c in self.cells), self.has_y, self.periods)


@dataclass(frozen=True)
class Field:
    """Real nodal values on a :class:`TorusGrid`.  Immutable."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise ConfigurationError(
                f"field has {vals.size} values, grid expects {self.grid.size}"
            )
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: TorusGrid, func) -> "Field":
        """Sample ``func(*coords)`` at the nodes (coords as in :meth:`TorusGrid.mesh`)."""
        vals = np.broadcast_to(func(*grid.mesh()), grid.shape)
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid: TorusGrid, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_flat(cls, grid: TorusGrid, flat) -> "Field":
        return cls(grid, np.asarray(flat, dtype=float).reshape(grid.shape, order="F"))

    def flat(self) -> np.ndarray:
        """Lexicographic value sequence, first x-axis fastest, y slowest."""
        return self.values.ravel(order="F")

    def __add__(self, other):
        if isinstance(other, Field):
            other = other.values
        return Field(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, Field):
            other = other.values
        return Field(self.grid, self.values - other)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def mean(self) -> float:
        return float(self.values.mean())


def reduce_max_over_y(f: Field) -> Field:
    """Per-column maximum over the y-axis, as a field on the x-only grid."""
    if not f.grid.has_y:
        raise ConfigurationError("reduce_max_over_y needs a grid with a y-axis")
    return Field(f.grid.x_grid(), f.values.max(axis=-1))


def oscillation(f: Field | np.ndarray) -> float:
    """``max(f) - min(f)``."""
    vals = f.values if isinstance(f, Field) else np.asarray(f)
    return float(vals.max() - vals.min())


def sup_distance(a: Field, b: Field) -> float:
    """Sup-norm distance sampled on the coarsest common lattice of the two grids."""
    if a.grid.periods != b.grid.periods or a.grid.has_y != b.grid.has_y:
        raise ConfigurationError("fields live on incompatible tori")
    coarse = tuple(np.gcd(ca, cb) for ca, cb in zip(a.grid.cells, b.grid.cells))
    sa = tuple(slice(None, None, ca // c) for ca, c in zip(a.grid.cells, coarse))
    sb = tuple(slice(None, None, cb // c) for cb, c in zip(b.grid.cells, coarse))
    return float(np.max(np.abs(a.values[sa] - b.values[sb])))
