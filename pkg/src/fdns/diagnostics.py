"""Taylor-Green vortex setup, integral diagnostics and time-series output.

Kinetic energy and enstrophy are the density-weighted volume averages

    KE = (1/(rho0 V)) * sum( 0.5 rho |u|^2 ) * dV
    EN = (1/(rho0 V)) * sum( 0.5 rho |omega|^2 ) * dV

with rho0 the mean initial density, V the analytic box volume and omega
the curl of u from the 4th-order first-derivative stencils.  Integrals use
rectangle quadrature (sum times cell volume), which is spectrally
consistent on a periodic grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import ConfigurationError, Field, Grid, halo_exchange, reduce_sum
from .physics import ConservativeState, PhysicalConstants, Residual, \
    eval_primitives_grouped
from .stencil import first_derivative

TIMESERIES_HEADER = "time,ke,enstrophy,mass,mom0,mom1,mom2,energy"


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    kinetic_energy: float
    enstrophy: float
    total_mass: float
    total_momentum: tuple[float, float, float]
    total_energy: float

    def row(self) -> str:
        vals = (self.time, self.kinetic_energy, self.enstrophy,
                self.total_mass, *self.total_momentum, self.total_energy)
        return ",".join(f"{v:.17g}" for v in vals)

    def __str__(self):
        return (f"KE={self.kinetic_energy:.8f} "
                f"enstrophy={self.enstrophy:.8f}")


def _mesh_coords(grid: Grid):
    x = grid.coordinates(0)[:, None, None]
    y = grid.coordinates(1)[None, :, None]
    z = grid.coordinates(2)[None, None, :]
    return x, y, z


def taylor_green_init(grid: Grid,
                      constants: PhysicalConstants) -> ConservativeState:
    """Taylor-Green vortex initial condition on the 2*pi periodic cube.

    u = ( sin x cos y cos z, -cos x sin y cos z, 0 ),
    p = p0 + (1/16)(cos 2x + cos 2y)(cos 2z + 2) with p0 = 1/(gamma M^2),
    uniform initial temperature T = 1, so rho = gamma M^2 p.
    """
    for a in range(3):
        length = grid.npoints[a] * grid.delta[a]
        if abs(length - 2.0 * math.pi) > 1e-12 * 2.0 * math.pi:
            raise ConfigurationError(
                "Taylor-Green initializer requires a 2*pi cube; axis "
                f"{a} has length {length}")
    x, y, z = _mesh_coords(grid)
    u0 = np.sin(x) * np.cos(y) * np.cos(z)
    u1 = -np.cos(x) * np.sin(y) * np.cos(z)
    p0 = 1.0 / (constants.gamma * constants.M ** 2)
    p = p0 + (np.cos(2 * x) + np.cos(2 * y)) * (np.cos(2 * z) + 2.0) / 16.0
    rho = constants.gM2 * p

    state = ConservativeState(grid)
    state.rho.fill_interior(rho)
    state.rhou[0].fill_interior(rho * u0)
    state.rhou[1].fill_interior(rho * u1)
    state.rhou[2].fill_interior(0.0)
    state.rhoE.fill_interior(p / constants.gm1
                             + 0.5 * rho * (u0 * u0 + u1 * u1))
    for f in state.conservative:
        halo_exchange(f)
    eval_primitives_grouped(state, constants)
    return state


def mean_density(state: ConservativeState) -> float:
    n = np.prod(state.grid.npoints)
    return reduce_sum(state.rho) / float(n)


def kinetic_energy_integral(state: ConservativeState, grid: Grid,
                            rho0: float | None = None) -> float:
    if rho0 is None:
        rho0 = mean_density(state)
    volume = float(np.prod(grid.npoints)) * grid.cell_volume
    ke = 0.5 * state.rho.interior * (
        state.u[0].interior ** 2 + state.u[1].interior ** 2
        + state.u[2].interior ** 2)
    return float(np.sum(ke)) * grid.cell_volume / (rho0 * volume)


def vorticity(state: ConservativeState) -> list[Field]:
    """curl(u) by the 4th-order stencils; velocity halos must be current."""
    d = {}
    for i in (1, 2):
        d[(0, i)] = first_derivative(state.u[0], i)
    for i in (0, 2):
        d[(1, i)] = first_derivative(state.u[1], i)
    for i in (0, 1):
        d[(2, i)] = first_derivative(state.u[2], i)
    grid = state.grid
    w0 = Field(grid)
    w0.interior[...] = d[(2, 1)].interior - d[(1, 2)].interior
    w1 = Field(grid)
    w1.interior[...] = d[(0, 2)].interior - d[(2, 0)].interior
    w2 = Field(grid)
    w2.interior[...] = d[(1, 0)].interior - d[(0, 1)].interior
    return [w0, w1, w2]


def enstrophy_integral(state: ConservativeState, grid: Grid,
                       rho0: float | None = None) -> float:
    if rho0 is None:
        rho0 = mean_density(state)
    volume = float(np.prod(grid.npoints)) * grid.cell_volume
    w = vorticity(state)
    ens = 0.5 * state.rho.interior * (
        w[0].interior ** 2 + w[1].interior ** 2 + w[2].interior ** 2)
    return float(np.sum(ens)) * grid.cell_volume / (rho0 * volume)


def conservation_sums(fields, grid: Grid):
    """Interior sums times cell volume for five residual-or-state fields.

    Accepts a Residual, a ConservativeState, or a 5-element field list;
    returns (mass, (mom0, mom1, mom2), energy).
    """
    if isinstance(fields, Residual):
        fields = fields.fields
    elif isinstance(fields, ConservativeState):
        fields = fields.conservative
    sums = [reduce_sum(f) * grid.cell_volume for f in fields]
    return sums[0], (sums[1], sums[2], sums[3]), sums[4]


def make_collector(grid: Grid, rho0: float):
    """collect(time, state) callback for the time loop."""

    def collect(t, state):
        mass, mom, energy = conservation_sums(state, grid)
        return DiagnosticsRecord(
            time=t,
            kinetic_energy=kinetic_energy_integral(state, grid, rho0),
            enstrophy=enstrophy_integral(state, grid, rho0),
            total_mass=mass,
            total_momentum=mom,
            total_energy=energy,
        )

    return collect


def write_timeseries(records, path) -> None:
    """CSV time series, 17 significant digits, '\\n' line endings."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(TIMESERIES_HEADER + "\n")
            for rec in records:
                fh.write(rec.row() + "\n")
    except OSError as err:
        raise OSError(f"failed to write time series to {path}: {err}") from err


def read_timeseries(path) -> list[DiagnosticsRecord]:
    records = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TIMESERIES_HEADER:
            raise ValueError(f"unexpected time-series header in {path}: "
                             f"{header!r}")
        for line in fh:
            vals = [float(v) for v in line.split(",")]
            records.append(DiagnosticsRecord(
                time=vals[0], kinetic_energy=vals[1], enstrophy=vals[2],
                total_mass=vals[3], total_momentum=tuple(vals[4:7]),
                total_energy=vals[7]))
    return records
