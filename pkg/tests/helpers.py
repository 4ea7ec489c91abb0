"""Shared test utilities: padded-coordinate fills and manufactured states."""

import numpy as np

from fdns.mesh import Field, Grid, halo_exchange, make_grid
from fdns.physics import ConservativeState, PhysicalConstants, \
    eval_primitives_grouped

TWO_PI = 2.0 * np.pi


def padded_coords(grid: Grid):
    """Broadcastable (x, y, z) over the full padded array, extending the
    interior coordinate line x = i*delta through the halo layers.  Filling
    a field from these gives wrap-free halos for non-periodic test
    functions (polynomials)."""
    h = grid.halo
    out = []
    for a in range(3):
        c = (np.arange(-h, grid.npoints[a] + h) * grid.delta[a])
        shape = [1, 1, 1]
        shape[a] = c.size
        out.append(c.reshape(shape))
    return tuple(out)


def fill_padded(grid: Grid, func) -> Field:
    """Field whose padded array holds func(x, y, z) on extended coordinates
    (no periodic wrap in the halos)."""
    x, y, z = padded_coords(grid)
    f = Field(grid)
    f.data[...] = func(x, y, z) + np.zeros(grid.shape)
    return f


def fill_periodic(grid: Grid, func) -> Field:
    """Field holding func(x, y, z) on the interior with periodic halos."""
    x = grid.coordinates(0)[:, None, None]
    y = grid.coordinates(1)[None, :, None]
    z = grid.coordinates(2)[None, None, :]
    f = Field(grid)
    f.fill_interior(func(x, y, z) + np.zeros(tuple(grid.npoints)))
    return f


def cube(n: int, halo: int = 2) -> Grid:
    return make_grid((n, n, n), (TWO_PI,) * 3, halo=halo)


def state_from_primitives(grid: Grid, constants: PhysicalConstants,
                          rho, u, p) -> ConservativeState:
    """Conservative state assembled from primitive arrays (interior shape),
    with halos exchanged and primitives recovered."""
    state = ConservativeState(grid)
    state.rho.fill_interior(rho)
    for i in range(3):
        state.rhou[i].fill_interior(rho * u[i])
    state.rhoE.fill_interior(p / constants.gm1
                             + 0.5 * rho * (u[0] ** 2 + u[1] ** 2
                                            + u[2] ** 2))
    for f in state.conservative:
        halo_exchange(f)
    eval_primitives_grouped(state, constants)
    return state


def manufactured_state(grid: Grid,
                       constants: PhysicalConstants) -> ConservativeState:
    """Smooth periodic trig state exercising every residual term."""
    x = grid.coordinates(0)[:, None, None]
    y = grid.coordinates(1)[None, :, None]
    z = grid.coordinates(2)[None, None, :]
    rho = 1.0 + 0.1 * np.sin(x) * np.cos(y) * np.cos(z)
    u = [np.sin(x) * np.cos(y) * np.cos(z),
         -0.5 * np.cos(x) * np.sin(y) * np.cos(z),
         0.3 * np.cos(x) * np.cos(y) * np.sin(z)]
    p0 = 1.0 / (constants.gamma * constants.M ** 2)
    p = p0 * (1.0 + 0.05 * np.cos(2 * x) * np.cos(y)
              + 0.03 * np.sin(z) * np.cos(x))
    shape = tuple(grid.npoints)
    return state_from_primitives(grid, constants,
                                 rho + np.zeros(shape),
                                 [ui + np.zeros(shape) for ui in u],
                                 p + np.zeros(shape))


def quiescent_state(grid: Grid,
                    constants: PhysicalConstants) -> ConservativeState:
    """Uniform motionless state: every spatial derivative vanishes."""
    shape = tuple(grid.npoints)
    return state_from_primitives(
        grid, constants, np.ones(shape),
        [np.zeros(shape)] * 3, np.full(shape, 1.0 / constants.gM2))


def rel_linf(a, b) -> float:
    scale = np.max(np.abs(b))
    if scale == 0.0:
        return float(np.max(np.abs(a - b)))
    return float(np.max(np.abs(a - b)) / scale)
