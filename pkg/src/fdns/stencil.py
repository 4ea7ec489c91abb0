"""Fourth-order central finite-difference operators on halo-padded fields.

First derivative:   d(i) = [f(i-2) - 8 f(i-1) + 8 f(i+1) - f(i+2)] / (12 d)
Second derivative:  d(i) = [-f(i-2) + 16 f(i-1) - 30 f(i) + 16 f(i+1) - f(i+2)] / (12 d^2)

Weights are evaluated once per grid, pre-divided by delta (and delta^2), and
reused everywhere: the vectorized operators here, the work-array fill stage
and the generated point kernels all apply the same weights in the same
expression shape, so every evaluation route produces identical bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Field, Grid, halo_exchange


@dataclass(frozen=True)
class StencilWeights:
    """Per-axis stencil weights, pre-divided by the grid spacing.

    first = (w1, w2): d = w1*(f(+1) - f(-1)) + w2*(f(+2) - f(-2))
    second = (s0, s1, s2): d = s0*f(0) + s1*(f(+1) + f(-1)) + s2*(f(+2) + f(-2))
    """

    first: tuple[float, float]
    second: tuple[float, float, float]

    @property
    def first_full(self) -> tuple[float, ...]:
        """First-derivative weights for offsets -2..+2 (antisymmetric)."""
        w1, w2 = self.first
        return (-w2, -w1, 0.0, w1, w2)

    @property
    def second_full(self) -> tuple[float, ...]:
        """Second-derivative weights for offsets -2..+2 (symmetric)."""
        s0, s1, s2 = self.second
        return (s2, s1, s0, s1, s2)


def make_weights(delta: float) -> StencilWeights:
    return StencilWeights(
        first=(8.0 / (12.0 * delta), -1.0 / (12.0 * delta)),
        second=(-30.0 / (12.0 * delta * delta),
                16.0 / (12.0 * delta * delta),
                -1.0 / (12.0 * delta * delta)),
    )


def grid_weights(grid: Grid) -> tuple[StencilWeights, StencilWeights, StencilWeights]:
    return tuple(make_weights(d) for d in grid.delta)


def _check_axis(axis: int) -> None:
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")


def _shift(data: np.ndarray, grid: Grid, axis: int, off: int) -> np.ndarray:
    """Interior-shaped view of the padded array shifted along one axis."""
    h = grid.halo
    sl = [slice(h, h + n) for n in grid.npoints]
    sl[axis] = slice(h + off, h + grid.npoints[axis] + off)
    return data[tuple(sl)]


def first_derivative(f: Field, axis: int, out: Field | None = None) -> Field:
    """4th-order first derivative along an axis; requires a current halo.

    The output interior is filled; its halo is not refreshed.
    """
    _check_axis(axis)
    grid = f.grid
    w = make_weights(grid.delta[axis])
    if out is None:
        out = Field(grid)
    w1, w2 = w.first
    out.interior[...] = (
        w1 * (_shift(f.data, grid, axis, +1) - _shift(f.data, grid, axis, -1))
        + w2 * (_shift(f.data, grid, axis, +2) - _shift(f.data, grid, axis, -2))
    )
    return out


def second_derivative(f: Field, axis: int, out: Field | None = None) -> Field:
    """4th-order second derivative along an axis; requires a current halo."""
    _check_axis(axis)
    grid = f.grid
    w = make_weights(grid.delta[axis])
    if out is None:
        out = Field(grid)
    s0, s1, s2 = w.second
    out.interior[...] = (
        s0 * _shift(f.data, grid, axis, 0)
        + s1 * (_shift(f.data, grid, axis, +1) + _shift(f.data, grid, axis, -1))
        + s2 * (_shift(f.data, grid, axis, +2) + _shift(f.data, grid, axis, -2))
    )
    return out


def cross_derivative(f: Field, axis_a: int, axis_b: int,
                     out: Field | None = None,
                     scratch: Field | None = None) -> Field:
    """Mixed second derivative d^2 f / (dx_a dx_b) by operator composition.

    Applies the inner derivative along axis_b, refreshes its halo, then the
    outer derivative along axis_a.  Equal axes are rejected; use
    second_derivative for those.
    """
    _check_axis(axis_a)
    _check_axis(axis_b)
    if axis_a == axis_b:
        raise ValueError("cross_derivative requires distinct axes; "
                         "use second_derivative for repeated axes")
    inner = first_derivative(f, axis_b, out=scratch)
    halo_exchange(inner)
    return first_derivative(inner, axis_a, out=out)
