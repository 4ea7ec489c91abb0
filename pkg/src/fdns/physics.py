"""Compressible Navier-Stokes term evaluation.

Holds the physical constants (with all rational factors precomputed once),
the conservative/primitive state container, primitive-variable recovery in
both the race-free grouped form and the fused conservative-variable form,
and the standalone stress-tensor / heat-flux / skew-convective operations.

Full residual assembly is delegated to a plan executor (see fdns.plan);
the two primitive paths here produce bitwise-identical values because both
evaluate p through 0.5*(rhou_j * u_j) with u_j = rhou_j / rho.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Field, Grid
from .stencil import first_derivative


class SolverDivergenceError(RuntimeError):
    """Raised when the solution stops being finite (or density positive)."""

    def __init__(self, message, iteration=None, substep=None):
        super().__init__(message)
        self.iteration = iteration
        self.substep = substep


@dataclass(frozen=True)
class PhysicalConstants:
    """Non-dimensional flow constants plus precomputed derived factors."""

    gamma: float = 1.4
    M: float = 0.1
    Pr: float = 0.71
    Re: float = 1600.0

    def __post_init__(self):
        if not (self.gamma > 1.0 and self.M > 0.0 and self.Pr > 0.0
                and self.Re > 0.0):
            raise ValueError(
                "require gamma > 1 and positive M, Pr, Re; got "
                f"gamma={self.gamma}, M={self.M}, Pr={self.Pr}, Re={self.Re}")

    # Derived factors, each evaluated once (properties of a frozen
    # dataclass; cheap enough that caching buys nothing).
    @property
    def gm1(self) -> float:
        return self.gamma - 1.0

    @property
    def gM2(self) -> float:
        return self.gamma * self.M * self.M

    @property
    def inv_Re(self) -> float:
        return 1.0 / self.Re

    @property
    def heat_coeff(self) -> float:
        return 1.0 / (self.gm1 * self.M * self.M * self.Pr * self.Re)

    @property
    def c13_inv_Re(self) -> float:
        return 1.0 / (3.0 * self.Re)

    @property
    def c43_inv_Re(self) -> float:
        return 4.0 / (3.0 * self.Re)

    @property
    def c23_inv_Re(self) -> float:
        return 2.0 / (3.0 * self.Re)

    def kernel_constants(self) -> tuple[float, ...]:
        """Scalars handed to the generated kernels, in signature order."""
        return (self.inv_Re, self.c13_inv_Re, self.c43_inv_Re,
                self.c23_inv_Re, self.heat_coeff)


@dataclass
class ConservativeState:
    """The five prognostic fields plus derived primitive fields."""

    grid: Grid
    rho: Field = None
    rhou: list[Field] = None
    rhoE: Field = None
    u: list[Field] = None
    p: Field = None
    T: Field = None

    def __post_init__(self):
        g = self.grid
        if self.rho is None:
            self.rho = Field(g)
        if self.rhou is None:
            self.rhou = [Field(g) for _ in range(3)]
        if self.rhoE is None:
            self.rhoE = Field(g)
        if self.u is None:
            self.u = [Field(g) for _ in range(3)]
        if self.p is None:
            self.p = Field(g)
        if self.T is None:
            self.T = Field(g)

    @property
    def conservative(self) -> list[Field]:
        return [self.rho, self.rhou[0], self.rhou[1], self.rhou[2], self.rhoE]

    def field_arrays(self) -> tuple[np.ndarray, ...]:
        """Padded data arrays in the generated-kernel argument order."""
        return (self.rho.data, self.rhou[0].data, self.rhou[1].data,
                self.rhou[2].data, self.rhoE.data, self.u[0].data,
                self.u[1].data, self.u[2].data, self.p.data, self.T.data)

    def check_physical(self, iteration=None, substep=None):
        for f, name in zip(self.conservative,
                           ("rho", "rhou0", "rhou1", "rhou2", "rhoE")):
            if not np.all(np.isfinite(f.interior)):
                raise SolverDivergenceError(
                    f"non-finite values in {name}", iteration, substep)
        if not np.all(self.rho.interior > 0.0):
            raise SolverDivergenceError(
                "non-positive density", iteration, substep)


@dataclass
class Residual:
    """RHS fields of the mass, momentum and energy equations."""

    grid: Grid
    d_rho: Field = None
    d_rhou: list[Field] = None
    d_rhoE: Field = None

    def __post_init__(self):
        g = self.grid
        if self.d_rho is None:
            self.d_rho = Field(g)
        if self.d_rhou is None:
            self.d_rhou = [Field(g) for _ in range(3)]
        if self.d_rhoE is None:
            self.d_rhoE = Field(g)

    @property
    def fields(self) -> list[Field]:
        return [self.d_rho, self.d_rhou[0], self.d_rhou[1], self.d_rhou[2],
                self.d_rhoE]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(f.data for f in self.fields)


def _pressure_from_conservative(state: ConservativeState,
                                c: PhysicalConstants) -> np.ndarray:
    # p = (gamma-1)*(rhoE - 0.5*rho*u_j^2), with rho*u_j^2 written as
    # rhou_j * u_j so the grouped and fused paths share every operation
    return c.gm1 * (state.rhoE.data
                    - 0.5 * (state.rhou[0].data * state.u[0].data
                             + state.rhou[1].data * state.u[1].data
                             + state.rhou[2].data * state.u[2].data))


def eval_primitives_grouped(state: ConservativeState,
                            c: PhysicalConstants) -> ConservativeState:
    """Primitive recovery in the race-free grouped ordering.

    Three separate grid passes: the velocity components (mutually
    independent) in one, then pressure, then temperature.  Evaluated over
    the full padded arrays, so with current conservative halos the
    primitive halos come out current as well.
    """
    for i in range(3):
        state.u[i].data[...] = state.rhou[i].data / state.rho.data
    state.p.data[...] = _pressure_from_conservative(state, c)
    state.T.data[...] = c.gM2 * state.p.data / state.rho.data
    return state


def eval_primitives_fused(state: ConservativeState,
                          c: PhysicalConstants) -> ConservativeState:
    """Primitive recovery from conservative variables alone, fusable into a
    single pass: p and T are expressed directly through (rho, rhou, rhoE)
    so nothing written in the pass is also read by it."""
    u0 = state.rhou[0].data / state.rho.data
    u1 = state.rhou[1].data / state.rho.data
    u2 = state.rhou[2].data / state.rho.data
    state.u[0].data[...] = u0
    state.u[1].data[...] = u1
    state.u[2].data[...] = u2
    p = c.gm1 * (state.rhoE.data
                 - 0.5 * (state.rhou[0].data * u0
                          + state.rhou[1].data * u1
                          + state.rhou[2].data * u2))
    state.p.data[...] = p
    state.T.data[...] = c.gM2 * p / state.rho.data
    return state


def stress_tensor(grad_u, c: PhysicalConstants):
    """Stress tensor from the nine velocity gradients.

    grad_u[i][j] holds du_i/dx_j (scalars or arrays); returns the full
    symmetric 3x3 nested list tau[i][j] = (1/Re)*(du_i/dx_j + du_j/dx_i
    - (2/3) delta_ij div u).
    """
    div = grad_u[0][0] + grad_u[1][1] + grad_u[2][2]
    tau = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            t = c.inv_Re * (grad_u[i][j] + grad_u[j][i])
            if i == j:
                t = t - c.c23_inv_Re * div
            tau[i][j] = t
            tau[j][i] = t
    return tau


def heat_flux(grad_T, c: PhysicalConstants):
    """q_j = heat_coeff * dT/dx_j for the three temperature gradients."""
    return [c.heat_coeff * g for g in grad_T]


def skew_convective(phi, uj: Field, rho: Field, axis: int) -> Field:
    """Skew-symmetric split convective contribution along one axis:

        0.5*( d(rho phi u_j)/dx_j + u_j d(rho phi)/dx_j
              + rho phi d(u_j)/dx_j )

    phi may be a Field or the scalar 1 (mass equation).  Inputs need
    current halos; products are formed over the padded arrays.
    """
    grid = uj.grid
    rhophi = Field(grid)
    if isinstance(phi, Field):
        rhophi.data[...] = rho.data * phi.data
    else:
        rhophi.data[...] = rho.data * float(phi)
    rhophiu = Field(grid)
    rhophiu.data[...] = rhophi.data * uj.data
    t1 = first_derivative(rhophiu, axis)
    t2 = first_derivative(rhophi, axis)
    t3 = first_derivative(uj, axis)
    out = Field(grid)
    out.interior[...] = 0.5 * (t1.interior + uj.interior * t2.interior
                               + rhophi.interior * t3.interior)
    return out
