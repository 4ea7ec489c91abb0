"""Kernel plans: storage invariants, budgets, race validation, schedules
and cross-plan / oracle agreement of the full residual."""

import gc
import pathlib

import numpy as np
import pytest

from fdns import mesh, terms
from fdns.codegen import FETCH, INLINE, LOCAL
from fdns.physics import PhysicalConstants, Residual
from fdns.plan import (PLAN_NAMES, KernelPlan, LoopGroup, ResidualEvaluator,
                       assemble_residual, build_plan, lower_plan,
                       plan_storage, validate_race_freedom, workarray_budget)
from helpers import cube, manufactured_state, quiescent_state, rel_linf
from oracles import brute_force_residual, unexpanded_residual

DATA = pathlib.Path(__file__).parent / "data"

CONSTANTS = PhysicalConstants()

DISTINCT_DERIVATIVES = 60  # registered terms of the 3D residual system


class TestTermList:
    def test_distinct_derivative_count(self):
        spec = terms.build_residual_spec()
        assert len(spec.derivatives) == DISTINCT_DERIVATIVES
        kinds = {"d1": 0, "d2": 0, "cross": 0}
        for d in spec.derivatives.values():
            kinds[d.kind] += 1
        assert kinds == {"d1": 42, "d2": 12, "cross": 6}

    def test_velocity_gradients_registered(self):
        spec = terms.build_residual_spec()
        assert len(spec.velocity_gradient_ids) == 9
        for vid in spec.velocity_gradient_ids:
            assert spec.derivatives[vid].kind == "d1"

    def test_every_occurrence_positive(self):
        spec = terms.build_residual_spec()
        assert all(n >= 1 for n in spec.occurrences.values())


class TestBuildPlan:
    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            build_plan("XX")

    def test_case_insensitive(self):
        assert build_plan("ss").name == "SS"

    def test_storage_invariants(self):
        spec = terms.build_residual_spec()
        velocity = set(spec.velocity_gradient_ids)
        expectations = {
            "BL": lambda did: FETCH,
            "RA": lambda did: INLINE,
            "SN": lambda did: LOCAL,
            "RS": lambda did: FETCH if did in velocity else INLINE,
            "SS": lambda did: FETCH if did in velocity else LOCAL,
        }
        for name, expect in expectations.items():
            storage = plan_storage(build_plan(name))
            for did, cls in storage.items():
                assert cls == expect(did), (name, did)

    def test_primitive_paths(self):
        assert build_plan("BL").primitives == "grouped"
        for name in ("RA", "RS", "SN", "SS"):
            assert build_plan(name).primitives == "fused"


class TestWorkArrayBudget:
    def test_budgets(self):
        budgets = {name: workarray_budget(build_plan(name))
                   for name in PLAN_NAMES}
        assert budgets["RA"] == 0
        assert budgets["SN"] == 0
        assert budgets["RS"] == 9
        assert budgets["SS"] == 9
        assert budgets["SS"] - budgets["SN"] == 9
        # all distinct derivatives plus the shared product scratch array
        assert budgets["BL"] == DISTINCT_DERIVATIVES + 1

    @pytest.mark.parametrize("name", PLAN_NAMES)
    def test_observed_allocations_match_budget(self, name):
        grid = cube(8)
        gc.collect()
        base = mesh.live_field_count()
        evaluator = ResidualEvaluator(grid, CONSTANTS, name)
        assert mesh.live_field_count() - base == workarray_budget(
            evaluator.plan)
        del evaluator
        gc.collect()
        assert mesh.live_field_count() == base


class TestRaceFreedom:
    @pytest.mark.parametrize("name", PLAN_NAMES)
    def test_shipped_plans_are_race_free(self, name):
        assert validate_race_freedom(build_plan(name)) == []

    def test_fused_primitive_violation_detected(self):
        # a deliberately wrong fusion: computing u from rhou and p from u
        # in the same loop makes p read velocities written in that loop
        bad_group = LoopGroup(
            "primitives:bad-fusion", "loop",
            writes=frozenset({"u0", "u1", "u2", "p"}),
            reads=frozenset({"rho", "rhou0", "rhou1", "rhou2", "rhoE",
                             "u0", "u1", "u2"}))
        template = build_plan("BL")
        bad = KernelPlan(name="BL", store_derivatives=True,
                         derivatives_to_store=template.derivatives_to_store,
                         local_variables=False, primitives="fused",
                         loop_groups=(bad_group,) + template.loop_groups[3:])
        violations = validate_race_freedom(bad)
        assert {(v.group, v.field) for v in violations} == {
            ("primitives:bad-fusion", "u0"),
            ("primitives:bad-fusion", "u1"),
            ("primitives:bad-fusion", "u2")}
        with pytest.raises(ValueError):
            lower_plan(bad)

    def test_unsatisfied_dependency_rejected(self):
        template = build_plan("SS")
        # drop the velocity-gradient fill loops: the residual group then
        # reads work arrays nothing has produced
        groups = tuple(g for g in template.loop_groups
                       if not g.name.startswith("fill:"))
        broken = KernelPlan(name="SS", store_derivatives=False,
                            derivatives_to_store=template.derivatives_to_store,
                            local_variables=True, primitives="fused",
                            loop_groups=groups)
        with pytest.raises(ValueError, match="before they are produced"):
            lower_plan(broken)


class TestSchedule:
    def test_stencil_application_counts(self):
        counts = {name: lower_plan(build_plan(name))
                  .stencil_applications_per_point()
                  for name in PLAN_NAMES}
        # BL applies each distinct derivative exactly once per point
        assert counts["BL"] == DISTINCT_DERIVATIVES
        # recompute-heavy ordering of the storage-free plans
        assert counts["RA"] >= counts["SN"] >= counts["SS"]
        assert counts["RA"] > counts["BL"]

    @pytest.mark.parametrize("name", ["SS", "BL"])
    def test_golden_schedule_listing(self, name):
        listing = lower_plan(build_plan(name)).listing()
        golden = (DATA / f"schedule_{name.lower()}.txt").read_text()
        assert listing == golden

    def test_local_reuse_single_computation(self):
        # under LOCAL a derivative used k>1 times costs one application
        spec = terms.build_residual_spec()
        sched_sn = lower_plan(build_plan("SN"))
        multi = [did for did, n in spec.occurrences.items() if n > 1]
        assert multi  # the term list does share derivatives across terms
        # SN cost is independent of occurrence counts; RA scales with them
        ra = lower_plan(build_plan("RA")).stencil_applications_per_point()
        assert ra > sched_sn.stencil_applications_per_point()


class TestResidualValues:
    def test_quiescent_state_zero_residual(self):
        state = quiescent_state(cube(8), CONSTANTS)
        res = assemble_residual(state, CONSTANTS, "SS")
        for f in res.fields:
            assert np.max(np.abs(f.interior)) <= 1e-12

    def test_cross_plan_equivalence_single_evaluation(self):
        state = manufactured_state(cube(16), CONSTANTS)
        results = {}
        for name in PLAN_NAMES:
            res = assemble_residual(state, CONSTANTS, name)
            results[name] = [f.interior.copy() for f in res.fields]
        for name in PLAN_NAMES:
            for a, b in zip(results[name], results["BL"]):
                assert rel_linf(a, b) <= 1e-12

    def test_matches_brute_force_oracle(self):
        state = manufactured_state(cube(16), CONSTANTS)
        oracle = brute_force_residual(state, CONSTANTS)
        for name in PLAN_NAMES:
            res = assemble_residual(state, CONSTANTS, name)
            for a, b in zip(res.fields, oracle.fields):
                assert rel_linf(a.interior, b.interior) <= 1e-11

    def test_brute_force_agrees_with_unexpanded_form(self):
        # expanded viscous terms vs divergence-of-stress formulation:
        # different discretizations that converge together at 4th order
        errs = []
        for n in (16, 32):
            state = manufactured_state(cube(n), CONSTANTS)
            expanded = brute_force_residual(state, CONSTANTS)
            unexpanded = unexpanded_residual(state, CONSTANTS)
            worst = max(rel_linf(a.interior, b.interior)
                        for a, b in zip(expanded.fields, unexpanded.fields))
            errs.append(worst)
        ratio = errs[0] / errs[1]
        assert 8.0 <= ratio <= 40.0

    def test_brute_force_matches_analytic_rhs(self):
        # rho=1, u=(sin x,0,0), p=p0: closed-form residuals
        c = CONSTANTS
        errs = []
        for n in (32, 64):
            g = cube(n)
            shape = tuple(g.npoints)
            x = g.coordinates(0)[:, None, None]
            rho = np.ones(shape)
            u = [np.sin(x) + np.zeros(shape), np.zeros(shape),
                 np.zeros(shape)]
            p0 = 1.0 / c.gM2
            from helpers import state_from_primitives
            state = state_from_primitives(g, c, rho, u,
                                          np.full(shape, p0))
            res = brute_force_residual(state, c)
            d_rho_exact = -np.cos(x) + np.zeros(shape)
            d_rhou0_exact = (-np.sin(2 * x) - c.c43_inv_Re * np.sin(x)
                             + np.zeros(shape))
            d_rhoE_exact = (-(c.gamma / c.gm1) * p0 * np.cos(x)
                            + c.c43_inv_Re * np.cos(2 * x)
                            + np.zeros(shape))
            worst = max(
                np.max(np.abs(res.d_rho.interior - d_rho_exact)),
                np.max(np.abs(res.d_rhou[0].interior - d_rhou0_exact)),
                np.max(np.abs(res.d_rhou[1].interior)),
                np.max(np.abs(res.d_rhou[2].interior)),
                np.max(np.abs(res.d_rhoE.interior - d_rhoE_exact)))
            errs.append(worst)
        assert errs[0] <= 0.05  # ~250 * 4th-order truncation at 32 points
        ratio = errs[0] / errs[1]
        assert 10.0 <= ratio <= 25.0

    def test_conservation_sums_single_evaluation(self):
        from fdns.mesh import reduce_sum
        state = manufactured_state(cube(16), CONSTANTS)
        res = assemble_residual(state, CONSTANTS, "SS")
        names = ("mass", "mom0", "mom1", "mom2", "energy")
        for name, f in zip(names, res.fields):
            scale = float(np.sum(np.abs(f.interior))) + 1.0
            rel = abs(reduce_sum(f)) / scale
            if name == "energy":
                # the expanded viscous-work form does not telescope
                # discretely; its defect is truncation-level, not roundoff
                assert rel <= 1e-6
            else:
                assert rel <= 1e-12
