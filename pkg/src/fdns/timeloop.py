"""Three-stage low-storage Runge-Kutta integration with save-state.

Each outer iteration copies the conservative fields to a save-state buffer
and then runs three substeps of

    q(k) = q_saved + alpha[k] * dt * R(q(k-1)),      alpha = (1/3, 1/2, 1)

so only two registers per field are needed.  The scheme is third order on
linear problems (amplification 1 + z + z^2/2 + z^3/6) and second order on
nonlinear ones.  The update writes each conservative field from the saved
copy and the residual only, one field per pass, so no pass reads anything
it writes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .mesh import Field, halo_exchange
from .physics import ConservativeState, Residual, SolverDivergenceError
from .plan import ResidualEvaluator

RK3_ALPHA = (1.0 / 3.0, 1.0 / 2.0, 1.0)


@dataclass(frozen=True)
class RKScheme:
    dt: float
    alpha: tuple[float, ...] = RK3_ALPHA

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.alpha[-1] != 1.0:
            raise ValueError("final stage coefficient must be 1 so the "
                             "step reaches t + dt")

    @property
    def stages(self) -> int:
        return len(self.alpha)


@dataclass
class IterationState:
    state: ConservativeState
    saved: list[Field] = None
    iteration: int = 0
    substep: int = 0
    time: float = 0.0

    def __post_init__(self):
        if self.saved is None:
            self.saved = [Field(self.state.grid)
                          for _ in self.state.conservative]

    def save_state(self):
        for dst, src in zip(self.saved, self.state.conservative):
            np.copyto(dst.data, src.data)


@dataclass
class RunReport:
    """Diagnostics series and timing for one solver run."""

    iterations: int = 0
    loop_seconds: float = 0.0
    records: list = field(default_factory=list)
    completed: bool = True
    error: str | None = None


def rk_substep(it: IterationState, k: int, scheme: RKScheme,
               evaluator: ResidualEvaluator, residual: Residual):
    """One RK substep: residual under the active plan, then the update."""
    it.substep = k
    evaluator.evaluate(it.state, residual)
    coef = scheme.alpha[k] * scheme.dt
    # one pass per conservative field (update race rule)
    for saved, cons, res in zip(it.saved, it.state.conservative,
                                residual.fields):
        cons.interior[...] = saved.interior + coef * res.interior
        halo_exchange(cons)


def advance_iteration(it: IterationState, scheme: RKScheme,
                      evaluator: ResidualEvaluator, residual: Residual):
    it.save_state()
    for k in range(scheme.stages):
        rk_substep(it, k, scheme, evaluator, residual)
    it.time += scheme.dt
    it.iteration += 1


def run(state: ConservativeState, scheme: RKScheme,
        evaluator: ResidualEvaluator, niter: int,
        cadence: int = 0, collect=None, progress=False) -> RunReport:
    """Run niter outer iterations; time the iteration loop exclusively.

    cadence > 0 samples diagnostics (and checks solution health) every
    cadence iterations, including iteration 0 before any step; collect is
    called as collect(time, state) and returns a record to append.
    """
    it = IterationState(state)
    residual = Residual(state.grid)
    report = RunReport(iterations=niter)

    def sample():
        state.check_physical(it.iteration, it.substep)
        if collect is not None:
            rec = collect(it.time, state)
            report.records.append(rec)
            if progress:
                print(f"iter {it.iteration:6d}  t={it.time:.4f}  {rec}",
                      flush=True)

    try:
        if cadence > 0:
            sample()
        start = time.perf_counter()
        for _ in range(niter):
            advance_iteration(it, scheme, evaluator, residual)
            if cadence > 0 and it.iteration % cadence == 0:
                sample()
        report.loop_seconds = time.perf_counter() - start
    except SolverDivergenceError as err:
        report.loop_seconds = time.perf_counter() - start
        report.completed = False
        report.error = (f"diverged at iteration {err.iteration}, "
                        f"substep {err.substep}: {err}")
        raise
    return report
