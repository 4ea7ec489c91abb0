"""Structured 3D periodic grid, halo-padded fields, halo exchange and reductions.

Storage layout: every field is a C-ordered (row-major) numpy array of shape
(nx + 2h, ny + 2h, nz + 2h) with the last axis contiguous.  Interior points
occupy the slice [h : h + n] on each axis; the h-wide padding holds periodic
image values after a halo exchange.  Everything is float64.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

MIN_POINTS = 5   # the 5-point stencil must fit in the interior
MIN_HALO = 2     # stencil radius of the 4th-order 5-point operators


class ConfigurationError(ValueError):
    """Invalid grid or solver configuration."""


# Count of live grid-sized allocations, used by tests and the plan module to
# verify per-plan work-array budgets.  Incremented on Field construction,
# decremented when the underlying storage is garbage collected.
_live_fields = 0


def live_field_count() -> int:
    """Number of currently allocated grid-sized field arrays."""
    return _live_fields


def _release_one() -> None:
    global _live_fields
    _live_fields -= 1


@dataclass(frozen=True)
class Grid:
    """Structured periodic box: interior points, spacings and halo width."""

    npoints: tuple[int, int, int]
    delta: tuple[float, float, float]
    halo: int

    ndim = 3

    @property
    def shape(self) -> tuple[int, int, int]:
        """Padded array shape including halos."""
        h = self.halo
        return tuple(n + 2 * h for n in self.npoints)

    @property
    def cell_volume(self) -> float:
        return self.delta[0] * self.delta[1] * self.delta[2]

    def interior(self, data: np.ndarray) -> np.ndarray:
        """View of the interior (halo-stripped) region of a padded array."""
        h = self.halo
        return data[h:-h, h:-h, h:-h]

    def coordinates(self, axis: int) -> np.ndarray:
        """Interior point coordinates x_i = i * delta along one axis."""
        return np.arange(self.npoints[axis]) * self.delta[axis]


def make_grid(npoints, lengths, halo: int = MIN_HALO) -> Grid:
    """Build a periodic grid with delta[a] = lengths[a] / npoints[a]."""
    npoints = tuple(int(n) for n in npoints)
    lengths = tuple(float(l) for l in lengths)
    if len(npoints) != 3 or len(lengths) != 3:
        raise ConfigurationError("grid requires 3 point counts and 3 lengths")
    if any(n < MIN_POINTS for n in npoints):
        raise ConfigurationError(
            f"need at least {MIN_POINTS} points per axis for the 5-point "
            f"stencil, got {npoints}")
    if any(l <= 0.0 for l in lengths):
        raise ConfigurationError(f"box lengths must be positive, got {lengths}")
    if halo < MIN_HALO:
        raise ConfigurationError(f"halo width must be >= {MIN_HALO}, got {halo}")
    delta = tuple(l / n for l, n in zip(lengths, npoints))
    return Grid(npoints=npoints, delta=delta, halo=halo)


class Field:
    """One grid-sized double-precision scalar array with halo padding."""

    __slots__ = ("grid", "data", "__weakref__")

    def __init__(self, grid: Grid, data: np.ndarray | None = None):
        global _live_fields
        self.grid = grid
        if data is None:
            data = np.zeros(grid.shape, dtype=np.float64)
        else:
            if data.shape != grid.shape or data.dtype != np.float64:
                raise ConfigurationError(
                    f"field data must be float64 with shape {grid.shape}")
        self.data = data
        _live_fields += 1
        weakref.finalize(self, _release_one)

    @property
    def interior(self) -> np.ndarray:
        return self.grid.interior(self.data)

    def fill_interior(self, values) -> "Field":
        self.interior[...] = values
        return self

    def copy(self) -> "Field":
        return Field(self.grid, self.data.copy())


def halo_exchange(field: Field) -> Field:
    """Fill ghost layers with periodic interior images, in place.

    Axes are exchanged in order, each exchange copying full slabs of the
    padded array, so edge and corner ghost regions end up correct.
    Idempotent and bitwise exact (plain copies).
    """
    h = field.grid.halo
    data = field.data
    for axis, n in enumerate(field.grid.npoints):
        src_lo = [slice(None)] * 3
        src_hi = [slice(None)] * 3
        dst_lo = [slice(None)] * 3
        dst_hi = [slice(None)] * 3
        # low ghosts <- high interior, high ghosts <- low interior
        dst_lo[axis] = slice(0, h)
        src_lo[axis] = slice(n, n + h)
        dst_hi[axis] = slice(n + h, n + 2 * h)
        src_hi[axis] = slice(h, 2 * h)
        data[tuple(dst_lo)] = data[tuple(src_lo)]
        data[tuple(dst_hi)] = data[tuple(src_hi)]
    return field


def reduce_sum(field: Field) -> float:
    """Sum over interior points.

    Uses numpy's pairwise summation over the interior view in index order,
    which is deterministic for a given grid; worker count does not enter.
    """
    return float(np.sum(field.interior))
