"""Kernel plans: the declarative storage/recompute assignment per derivative.

A plan names one of the five algorithm variants and decides, for every
derivative in the fixed term list, whether its value lives in a grid-sized
work array (FETCH), a per-point loop-local scalar (LOCAL) or is re-expanded
from the stencil formula at every use (INLINE):

    BL  store all derivatives in work arrays; race-free grouped primitives
    RA  store nothing, recompute at every occurrence; fused primitives
    SN  store nothing, one loop-local scalar per distinct derivative
    RS  store only the nine velocity first derivatives, inline the rest
    SS  RS storage plus loop-locals for everything not stored

Plans are lowered to an ordered schedule of loop groups over the term list;
the race-freedom validator checks that no group writes a grid field it also
reads.  The lowered schedule drives the ResidualEvaluator, which owns the
work arrays and the generated point kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np

from . import codegen, stencil, terms
from .codegen import FETCH, INLINE, LOCAL
from .mesh import Field, Grid, halo_exchange
from .physics import (ConservativeState, PhysicalConstants, Residual,
                      eval_primitives_fused, eval_primitives_grouped)
from .terms import POINT_FIELDS, STATE_FIELDS, ResidualSpec

PLAN_NAMES = ("BL", "RA", "RS", "SN", "SS")

# One term list shared by every plan.
DEFAULT_SPEC = terms.build_residual_spec()

SCRATCH = "scratch0"


@dataclass(frozen=True)
class LoopGroup:
    """One grid loop (or a halo-exchange barrier) with its field footprint."""

    name: str
    kind: str  # "loop" or "halo"
    writes: frozenset[str]
    reads: frozenset[str]


@dataclass(frozen=True)
class KernelPlan:
    name: str
    store_derivatives: bool
    derivatives_to_store: frozenset[str]
    local_variables: bool
    primitives: str  # "grouped" or "fused"
    loop_groups: tuple[LoopGroup, ...]


def storage_classes(name: str, store_derivatives: bool,
                    derivatives_to_store: frozenset[str],
                    local_variables: bool,
                    spec: ResidualSpec) -> dict[str, str]:
    out = {}
    for did in spec.derivatives:
        if store_derivatives or did in derivatives_to_store:
            out[did] = FETCH
        elif local_variables:
            out[did] = LOCAL
        else:
            out[did] = INLINE
    return out


def _primitive_groups(primitives: str) -> list[LoopGroup]:
    cons = frozenset(STATE_FIELDS)
    if primitives == "grouped":
        # velocities fused (independent), then p, then T: the race-free
        # ordering for the primitive-variable forms of p and T
        return [
            LoopGroup("primitives:velocity", "loop",
                      frozenset({"u0", "u1", "u2"}),
                      frozenset({"rho", "rhou0", "rhou1", "rhou2"})),
            LoopGroup("primitives:pressure", "loop", frozenset({"p"}),
                      frozenset({"rhoE", "rhou0", "rhou1", "rhou2",
                                 "u0", "u1", "u2"})),
            LoopGroup("primitives:temperature", "loop", frozenset({"T"}),
                      frozenset({"p", "rho"})),
        ]
    # fused: p and T rewritten over conservative variables only, so the
    # single loop never reads anything it writes
    return [LoopGroup("primitives:fused", "loop",
                      frozenset({"u0", "u1", "u2", "p", "T"}), cons)]


def _wa(spec: ResidualSpec, did: str) -> str:
    return "wa_" + spec.derivatives[did].name


def _expr_fields(expr: str) -> frozenset[str]:
    return frozenset(f for f in POINT_FIELDS if f in
                     codegen._IDENT.findall(expr))


def _inner_ids(spec: ResidualSpec, storage: dict[str, str]) -> list[str]:
    """Inner first derivatives that cross terms read from work arrays."""
    ids = []
    for d in spec.derivatives.values():
        if d.kind != "cross":
            continue
        if storage[d.inner_id] == FETCH:
            if d.inner_id not in ids:
                ids.append(d.inner_id)
    return ids


def _build_loop_groups(primitives: str, storage: dict[str, str],
                       spec: ResidualSpec) -> tuple[LoopGroup, ...]:
    groups = list(_primitive_groups(primitives))
    derivs = spec.derivatives

    plain = [d for d in derivs.values()
             if storage[d.id] == FETCH and d.kind in ("d1", "d2")
             and not d.is_product]
    products = [d for d in derivs.values()
                if storage[d.id] == FETCH and d.is_product]
    crosses = [d for d in derivs.values()
               if storage[d.id] == FETCH and d.kind == "cross"]

    for d in plain:
        groups.append(LoopGroup(f"fill:{d.id}", "loop",
                                frozenset({_wa(spec, d.id)}),
                                frozenset({d.expr})))
    inner = _inner_ids(spec, storage)
    if inner:
        names = frozenset(_wa(spec, i) for i in inner)
        groups.append(LoopGroup("halo:velocity-divergence-arrays", "halo",
                                names, names))
    for d in crosses:
        groups.append(LoopGroup(f"fill:{d.id}", "loop",
                                frozenset({_wa(spec, d.id)}),
                                frozenset({_wa(spec, d.inner_id)})))
    for d in products:
        # two-stage rule: evaluate the product into the reusable scratch
        # array, then differentiate the scratch array
        groups.append(LoopGroup(f"product:{d.expr}", "loop",
                                frozenset({SCRATCH}), _expr_fields(d.expr)))
        groups.append(LoopGroup(f"fill:{d.id}", "loop",
                                frozenset({_wa(spec, d.id)}),
                                frozenset({SCRATCH})))

    fetched = frozenset(_wa(spec, did) for did, cls in storage.items()
                        if cls == FETCH)
    groups.append(LoopGroup("residual", "loop",
                            frozenset({"d_rho", "d_rhou0", "d_rhou1",
                                       "d_rhou2", "d_rhoE"}),
                            frozenset(POINT_FIELDS) | fetched))
    return tuple(groups)


def build_plan(name: str, spec: ResidualSpec = DEFAULT_SPEC) -> KernelPlan:
    """Build the named plan with its storage invariants and loop groups."""
    key = name.upper()
    if key not in PLAN_NAMES:
        raise ValueError(
            f"unknown plan {name!r}; expected one of {PLAN_NAMES}")
    velocity = frozenset(spec.velocity_gradient_ids)
    if key == "BL":
        store, to_store, locals_, prims = True, frozenset(spec.derivatives), \
            False, "grouped"
    elif key == "RA":
        store, to_store, locals_, prims = False, frozenset(), False, "fused"
    elif key == "SN":
        store, to_store, locals_, prims = False, frozenset(), True, "fused"
    elif key == "RS":
        store, to_store, locals_, prims = False, velocity, False, "fused"
    else:  # SS
        store, to_store, locals_, prims = False, velocity, True, "fused"
    storage = storage_classes(key, store, to_store, locals_, spec)
    return KernelPlan(
        name=key,
        store_derivatives=store,
        derivatives_to_store=to_store,
        local_variables=locals_,
        primitives=prims,
        loop_groups=_build_loop_groups(prims, storage, spec),
    )


def plan_storage(plan: KernelPlan,
                 spec: ResidualSpec = DEFAULT_SPEC) -> dict[str, str]:
    return storage_classes(plan.name, plan.store_derivatives,
                           plan.derivatives_to_store, plan.local_variables,
                           spec)


@dataclass(frozen=True)
class RaceViolation:
    group: str
    field: str


def validate_race_freedom(plan: KernelPlan) -> list[RaceViolation]:
    """Check that no loop group updates a grid field it also reads.

    Returns the offending (group, field) pairs; an empty list means the
    plan is race-free.  Halo-exchange barriers are not grid loops and are
    skipped.
    """
    violations = []
    for group in plan.loop_groups:
        if group.kind != "loop":
            continue
        for name in sorted(group.writes & group.reads):
            violations.append(RaceViolation(group.name, name))
    return violations


def workarray_budget(plan: KernelPlan,
                     spec: ResidualSpec = DEFAULT_SPEC) -> int:
    """Grid-sized derivative-storage allocations the plan requires:
    one work array per FETCH derivative plus the shared product scratch."""
    storage = plan_storage(plan, spec)
    fetched = [did for did, cls in storage.items() if cls == FETCH]
    scratch = 1 if any(spec.derivatives[d].is_product for d in fetched) else 0
    return len(fetched) + scratch


@dataclass
class KernelSchedule:
    """Executable lowering of a plan over the term list."""

    plan: KernelPlan
    spec: ResidualSpec
    storage: dict[str, str]
    loop_groups: tuple[LoopGroup, ...]

    @property
    def fetch_ids(self) -> list[str]:
        return [did for did in self.spec.derivatives
                if self.storage[did] == FETCH]

    @property
    def inner_halo_ids(self) -> list[str]:
        return _inner_ids(self.spec, self.storage)

    def stencil_applications_per_point(self) -> int:
        """Stencil applications per grid point per residual evaluation, at
        generated-source level (fills count one application per point)."""
        total = 0
        for did, d in self.spec.derivatives.items():
            cls = self.storage[did]
            if d.kind == "cross" and self.storage[d.inner_id] != FETCH:
                cost = 5  # outer stencil plus four shifted inner stencils
            else:
                cost = 1
            if cls == FETCH:
                total += 1
            elif cls == LOCAL:
                total += cost
            else:
                total += self.spec.occurrences[did] * cost
        return total

    def listing(self) -> str:
        """Human-readable schedule dump (group order, storage classes)."""
        lines = [f"plan {self.plan.name}",
                 f"primitives {self.plan.primitives}",
                 f"work-array budget {workarray_budget(self.plan, self.spec)}",
                 f"stencil applications/point "
                 f"{self.stencil_applications_per_point()}",
                 "", "loop groups:"]
        for g in self.loop_groups:
            lines.append(f"  [{g.kind}] {g.name}")
            lines.append(f"      writes: {', '.join(sorted(g.writes))}")
            lines.append(f"      reads:  {', '.join(sorted(g.reads))}")
        lines.append("")
        lines.append("derivative storage:")
        for did in sorted(self.spec.derivatives):
            lines.append(f"  {did:24s} {self.storage[did]}")
        lines.append("")
        return "\n".join(lines)

    def compile(self):
        return codegen.compile_kernel(self.spec, self.storage,
                                      tag=self.plan.name)


def lower_plan(plan: KernelPlan,
               spec: ResidualSpec = DEFAULT_SPEC) -> KernelSchedule:
    """Lower a plan to an executable schedule, checking data dependencies."""
    violations = validate_race_freedom(plan)
    if violations:
        raise ValueError(f"plan {plan.name} is not race-free: {violations}")
    storage = plan_storage(plan, spec)
    available = set(STATE_FIELDS)
    for group in plan.loop_groups:
        if group.kind == "halo":
            missing = group.reads - available
        else:
            missing = group.reads - available
        if missing:
            raise ValueError(
                f"group {group.name} reads {sorted(missing)} before they "
                "are produced")
        available |= group.writes
    return KernelSchedule(plan=plan, spec=spec, storage=storage,
                          loop_groups=plan.loop_groups)


class ResidualEvaluator:
    """Owns the work arrays and generated kernel for one (grid, plan) pair
    and evaluates the full RHS residual under that plan."""

    def __init__(self, grid: Grid, constants: PhysicalConstants,
                 plan: KernelPlan | str, spec: ResidualSpec = DEFAULT_SPEC,
                 workers: int = 1):
        if isinstance(plan, str):
            plan = build_plan(plan, spec)
        self.grid = grid
        self.constants = constants
        self.plan = plan
        self.spec = spec
        self.workers = workers
        self.schedule = lower_plan(plan, spec)
        storage = self.schedule.storage

        self.work: dict[str, Field] = {
            did: Field(grid) for did in self.schedule.fetch_ids}
        needs_scratch = any(spec.derivatives[d].is_product
                            for d in self.schedule.fetch_ids)
        self.scratch = Field(grid) if needs_scratch else None

        self._fills = self._build_fill_steps(storage)
        self.kernel = self.schedule.compile()
        self._weights = self._flat_weights()

    def _flat_weights(self):
        out = []
        for w in stencil.grid_weights(self.grid):
            out.extend((w.first[0], w.first[1],
                        w.second[0], w.second[1], w.second[2]))
        return tuple(out)

    def _build_fill_steps(self, storage):
        spec = self.spec
        derivs = spec.derivatives
        plain, crosses, products = [], [], []
        for did in self.schedule.fetch_ids:
            d = derivs[did]
            if d.kind == "cross":
                crosses.append(d)
            elif d.is_product:
                products.append(d)
            else:
                plain.append(d)
        inner = self.schedule.inner_halo_ids
        return {"plain": plain, "crosses": crosses, "products": products,
                "inner": inner}

    def _source_field(self, state: ConservativeState, name: str) -> Field:
        mapping = {"rho": state.rho, "rhou0": state.rhou[0],
                   "rhou1": state.rhou[1], "rhou2": state.rhou[2],
                   "rhoE": state.rhoE, "u0": state.u[0], "u1": state.u[1],
                   "u2": state.u[2], "p": state.p, "T": state.T}
        return mapping[name]

    def _run_fills(self, state: ConservativeState):
        spec = self.spec
        for d in self._fills["plain"]:
            src = self._source_field(state, d.expr)
            out = self.work[d.id]
            if d.kind == "d1":
                stencil.first_derivative(src, d.axes[0], out=out)
            else:
                stencil.second_derivative(src, d.axes[0], out=out)
        for did in self._fills["inner"]:
            halo_exchange(self.work[did])
        for d in self._fills["crosses"]:
            stencil.first_derivative(self.work[d.inner_id], d.axes[0],
                                     out=self.work[d.id])
        if self._fills["products"]:
            namespace = {name: self._source_field(state, name).data
                         for name in POINT_FIELDS}
            for d in self._fills["products"]:
                # stage 1: product into the reusable scratch array
                self.scratch.data[...] = eval(d.expr, {"__builtins__": {}},
                                              namespace)
                # stage 2: differentiate the scratch array
                stencil.first_derivative(self.scratch, d.axes[0],
                                         out=self.work[d.id])

    def evaluate(self, state: ConservativeState, out: Residual) -> Residual:
        """Primitives, work-array fills and the fused residual kernel.

        Requires current halos on the conservative fields; primitive and
        product evaluations run over the full padded arrays so their halo
        values come out current without extra exchanges.
        """
        import numba

        if self.plan.primitives == "grouped":
            eval_primitives_grouped(state, self.constants)
        else:
            eval_primitives_fused(state, self.constants)
        self._run_fills(state)

        grid = self.grid
        fetch_arrays = tuple(self.work[did].data
                             for did in self.schedule.fetch_ids)
        numba.set_num_threads(self.workers)
        self.kernel(*state.field_arrays(), *fetch_arrays, *out.arrays(),
                    grid.halo, *grid.npoints, *self._weights,
                    *self.constants.kernel_constants())
        return out


def assemble_residual(state: ConservativeState, constants: PhysicalConstants,
                      plan: KernelPlan | str,
                      spec: ResidualSpec = DEFAULT_SPEC,
                      workers: int = 1) -> Residual:
    """One-shot residual assembly under a plan (tests and small runs)."""
    ev = ResidualEvaluator(state.grid, constants, plan, spec, workers)
    out = Residual(state.grid)
    return ev.evaluate(state, out)
