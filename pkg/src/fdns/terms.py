"""Fixed, pre-expanded derivative term list for the 3D residual.

The right-hand sides of the mass, momentum and energy equations are written
out once here as plain expression strings over the point values of the
stored fields (rho, rhou0..2, rhoE, u0..2, p, T), scalar physical constants
and derivative placeholders of the form ``{D(u0,x1)}``.  The convective
terms use the skew-symmetric split

    d(rho*phi*u_j)/dx_j -> 0.5*( d(rho*phi*u_j)/dx_j
                                 + u_j * d(rho*phi)/dx_j
                                 + rho*phi * d(u_j)/dx_j )

with phi = 1 (mass), u_i (momentum) and internal energy (energy), and the
viscous terms are expanded to second and mixed second derivatives with the
rational constants (1/Re, 4/(3Re), ...) precomputed.

Every kernel plan is lowered over this one term list; the plans differ only
in where each derivative placeholder's value lives (work array, loop-local
scalar, or re-expanded stencil formula).
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Grid-point fields a residual expression may reference.
STATE_FIELDS = ("rho", "rhou0", "rhou1", "rhou2", "rhoE")
PRIMITIVE_FIELDS = ("u0", "u1", "u2", "p", "T")
POINT_FIELDS = STATE_FIELDS + PRIMITIVE_FIELDS

# Scalar constants available inside kernels, all precomputed at setup.
KERNEL_CONSTANTS = ("inv_Re", "c13_inv_Re", "c43_inv_Re", "c23_inv_Re",
                    "heat_coeff")

RESIDUAL_FIELDS = ("d_rho", "d_rhou0", "d_rhou1", "d_rhou2", "d_rhoE")

# Internal energy density rho*e = rho*E - 0.5*rho*|u|^2, spelled out over
# stored fields so it can be evaluated at any stencil offset.
RHOE_INTERNAL = "(rhoE - 0.5*(rhou0*u0 + rhou1*u1 + rhou2*u2))"


@dataclass(frozen=True)
class Deriv:
    """One distinct spatial derivative appearing in the residuals.

    kind: "d1" (first), "d2" (second) or "cross" (mixed second, evaluated
    as the outer first derivative of an inner first derivative).
    expr: point expression being differentiated, over field names only.
    axes: (axis,) for d1/d2; (outer_axis, inner_axis) for cross.
    """

    id: str
    kind: str
    expr: str
    axes: tuple[int, ...]

    @property
    def name(self) -> str:
        """Identifier-safe short name, used for arrays and locals."""
        out = self.id
        for a, b in (("(", "_"), (")", ""), (",", "_"), ("*", ""),
                     ("D2", "dd"), ("DD", "dx"), ("D", "d")):
            out = out.replace(a, b)
        return out.lower()

    @property
    def is_product(self) -> bool:
        """True when the target is a combination of fields, requiring the
        two-stage (evaluate product, then differentiate) treatment when
        stored to a work array."""
        return self.expr not in POINT_FIELDS

    @property
    def inner_id(self) -> str:
        """For cross derivatives: id of the inner first derivative."""
        assert self.kind == "cross"
        return f"D({self.expr},x{self.axes[1]})"


@dataclass
class ResidualSpec:
    """The residual expressions plus the derivative registry behind them."""

    derivatives: dict[str, Deriv] = field(default_factory=dict)
    residuals: dict[str, str] = field(default_factory=dict)
    occurrences: dict[str, int] = field(default_factory=dict)

    # ids of the nine first derivatives of velocity components, the set the
    # RS and SS plans keep in work arrays
    velocity_gradient_ids: tuple[str, ...] = ()

    def _ref(self, d: Deriv) -> str:
        existing = self.derivatives.get(d.id)
        if existing is None:
            self.derivatives[d.id] = d
        else:
            assert existing == d, f"conflicting definitions for {d.id}"
        return "{" + d.id + "}"

    def d1(self, target: str, axis: int, expr: str | None = None) -> str:
        return self._ref(Deriv(f"D({target},x{axis})", "d1",
                               expr if expr is not None else target, (axis,)))

    def d2(self, target: str, axis: int) -> str:
        return self._ref(Deriv(f"D2({target},x{axis})", "d2", target, (axis,)))

    def cross(self, target: str, outer: int, inner: int) -> str:
        assert outer != inner
        return self._ref(Deriv(f"DD({target},x{outer},x{inner})", "cross",
                               target, (outer, inner)))


def _viscous(spec: ResidualSpec, i: int) -> str:
    """Expanded viscous term of momentum equation i: the divergence of the
    stress tensor row, collected to (4/3) d2(u_i)/dx_i^2 + laplacian cross
    terms + (1/3) mixed derivatives of the other velocity components."""
    parts = [f"c43_inv_Re*{spec.d2(f'u{i}', i)}"]
    for j in range(3):
        if j == i:
            continue
        parts.append(f"inv_Re*{spec.d2(f'u{i}', j)}")
        parts.append(f"c13_inv_Re*{spec.cross(f'u{j}', i, j)}")
    return " + ".join(parts)


def _tau(spec: ResidualSpec, i: int, j: int) -> str:
    """Stress tensor component over velocity-gradient placeholders."""
    if i == j:
        divu = " + ".join(spec.d1(f"u{k}", k) for k in range(3))
        return (f"(2.0*inv_Re*{spec.d1(f'u{i}', i)}"
                f" - c23_inv_Re*({divu}))")
    return f"(inv_Re*({spec.d1(f'u{i}', j)} + {spec.d1(f'u{j}', i)}))"


def build_residual_spec(energy_phi: str = "internal") -> ResidualSpec:
    """Assemble the full 3D residual term list.

    energy_phi selects the quantity carried by the skew-split energy
    convective term: "internal" (rho*e, with the pressure transport kept as
    a separate divergence d(u_j*p)/dx_j) or "total" (rho*E).
    """
    if energy_phi == "internal":
        rhoe = RHOE_INTERNAL
    elif energy_phi == "total":
        rhoe = "rhoE"
    else:
        raise ValueError(f"unknown energy_phi: {energy_phi}")

    spec = ResidualSpec()

    # mass: -(skew divergence of rho u_j)
    mass_terms = " + ".join(
        f"{spec.d1(f'rhou{j}', j)} + u{j}*{spec.d1('rho', j)}"
        f" + rho*{spec.d1(f'u{j}', j)}"
        for j in range(3))
    spec.residuals["d_rho"] = f"-(0.5*({mass_terms}))"

    # momentum i: -(skew convective) - dp/dx_i + viscous
    for i in range(3):
        conv = " + ".join(
            f"{spec.d1(f'rhou{i}*u{j}', j)} + u{j}*{spec.d1(f'rhou{i}', j)}"
            f" + rhou{i}*{spec.d1(f'u{j}', j)}"
            for j in range(3))
        spec.residuals[f"d_rhou{i}"] = (
            f"-(0.5*({conv})) - {spec.d1('p', i)} + {_viscous(spec, i)}")

    # energy: -(skew convective of rho*e) - pressure work + heat conduction
    #         + viscous work (tau_ij du_i/dx_j + u_i * div(tau_i))
    conv_e = " + ".join(
        f"{spec.d1(f'rhoe*u{j}', j, expr=f'({rhoe}*u{j})')}"
        f" + u{j}*{spec.d1('rhoe', j, expr=rhoe)}"
        f" + {rhoe}*{spec.d1(f'u{j}', j)}"
        for j in range(3))
    pwork = " + ".join(spec.d1(f"u{j}*p", j) for j in range(3))
    heat = ("heat_coeff*(" +
            " + ".join(spec.d2("T", j) for j in range(3)) + ")")
    tau_grad = " + ".join(
        f"{_tau(spec, i, j)}*{spec.d1(f'u{i}', j)}"
        for i in range(3) for j in range(3))
    u_div_tau = " + ".join(f"u{i}*({_viscous(spec, i)})" for i in range(3))
    spec.residuals["d_rhoE"] = (
        f"-(0.5*({conv_e})) - ({pwork}) + {heat}"
        f" + {tau_grad} + {u_div_tau}")

    spec.velocity_gradient_ids = tuple(
        f"D(u{i},x{j})" for i in range(3) for j in range(3))
    for vid in spec.velocity_gradient_ids:
        assert vid in spec.derivatives

    for did in spec.derivatives:
        spec.occurrences[did] = sum(
            expr.count("{" + did + "}") for expr in spec.residuals.values())
        assert spec.occurrences[did] > 0, did

    # every cross derivative's inner derivative must itself be registered
    for d in spec.derivatives.values():
        if d.kind == "cross":
            assert d.inner_id in spec.derivatives

    return spec
