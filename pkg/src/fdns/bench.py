"""Timing harness: per-variant runtime tables and scaling sweeps.

A worker is one thread over a partitioned shared grid, standing in for one
MPI rank of a distributed run; worker sweeps therefore read as
shared-memory analogues of process scaling.  Each table cell gets a fresh
Taylor-Green state, two untimed warmup iterations, and then the timed
iteration loop (setup, initialization and I/O excluded).  Results default
to a single timed measurement per cell; a repeat count keeps the minimum.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .diagnostics import kinetic_energy_integral, mean_density, \
    taylor_green_init
from .mesh import make_grid
from .physics import PhysicalConstants
from .plan import PLAN_NAMES, ResidualEvaluator
from .timeloop import RKScheme, run

TWO_PI = 2.0 * np.pi

# time step of the 64^3 reference case; halved per 2^3 grid-size increase
DT_64 = 3.385e-3


def auto_dt(npoints) -> float:
    """dt for a grid, from the 64^3 value halved per 8x point increase."""
    factor = float(np.prod(npoints)) / 64 ** 3
    return DT_64 / factor ** (1.0 / 3.0)


@dataclass(frozen=True)
class TimingRecord:
    grid: tuple[int, int, int]
    plan: str
    workers: int
    iterations: int
    loop_seconds: float
    final_ke: float = float("nan")

    @property
    def seconds_per_iteration(self) -> float:
        return self.loop_seconds / max(self.iterations, 1)


def _time_cell(npoints, plan_name, workers, iterations, constants,
               warmup=2, repeats=1, dt=None) -> TimingRecord:
    grid = make_grid(npoints, (TWO_PI,) * 3)
    if dt is None:
        dt = auto_dt(npoints)
    scheme = RKScheme(dt=dt)
    best = None
    final_ke = float("nan")
    for _ in range(max(repeats, 1)):
        state = taylor_green_init(grid, constants)
        rho0 = mean_density(state)
        evaluator = ResidualEvaluator(grid, constants, plan_name,
                                      workers=workers)
        run(state, scheme, evaluator, warmup)
        report = run(state, scheme, evaluator, iterations)
        if best is None or report.loop_seconds < best:
            best = report.loop_seconds
        final_ke = kinetic_energy_integral(state, grid, rho0)
    return TimingRecord(grid=tuple(npoints), plan=plan_name, workers=workers,
                        iterations=iterations, loop_seconds=best,
                        final_ke=final_ke)


def bench_variants(grids, plans=PLAN_NAMES, iterations=100, workers=1,
                   constants=None, repeats=1, verbose=False):
    """One timing record per (grid, plan), identical initial state per
    table cell."""
    constants = constants or PhysicalConstants()
    records = []
    for npoints in grids:
        for plan_name in plans:
            rec = _time_cell(npoints, plan_name, workers, iterations,
                             constants, repeats=repeats)
            records.append(rec)
            if verbose:
                print(f"{rec.grid} {rec.plan:3s} workers={rec.workers} "
                      f"{rec.loop_seconds:.3f}s", flush=True)
    return records


def speedup_rows(records):
    """BL-normalized speedups per grid: rows (grid, {plan: speedup})."""
    grids, plans = [], []
    for rec in records:
        if rec.grid not in grids:
            grids.append(rec.grid)
        if rec.plan not in plans:
            plans.append(rec.plan)
    by_cell = {(rec.grid, rec.plan): rec for rec in records}
    rows = []
    for grid in grids:
        base = by_cell[(grid, "BL")].loop_seconds
        rows.append((grid, {plan: base / by_cell[(grid, plan)].loop_seconds
                            for plan in plans}))
    return rows


def write_bench_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write("Nx,Ny,Nz,plan,workers,iterations,loop_seconds\n")
        for r in records:
            fh.write(f"{r.grid[0]},{r.grid[1]},{r.grid[2]},{r.plan},"
                     f"{r.workers},{r.iterations},{r.loop_seconds:.6f}\n")


def write_speedup_csv(records, path):
    plans = []
    for r in records:
        if r.plan not in plans:
            plans.append(r.plan)
    with open(path, "w", newline="") as fh:
        fh.write("Nx,Ny,Nz," + ",".join(plans) + "\n")
        for grid, speedups in speedup_rows(records):
            row = [str(grid[0]), str(grid[1]), str(grid[2])]
            row += [f"{speedups[p]:.4f}" for p in plans]
            fh.write(",".join(row) + "\n")


@dataclass(frozen=True)
class ScalingRecord:
    workers: int
    grid: tuple[int, int, int]
    loop_seconds: float
    normalized: float
    ideal: float


def strong_scaling(npoints, plan_name, worker_list, iterations,
                   constants=None, repeats=1, verbose=False):
    """Fixed global grid, varying workers; runtimes normalized by the
    smallest worker count's, with the ideal-scaling reference."""
    constants = constants or PhysicalConstants()
    raw = []
    for workers in worker_list:
        rec = _time_cell(npoints, plan_name, workers, iterations,
                         constants, repeats=repeats)
        raw.append(rec)
        if verbose:
            print(f"strong {npoints} workers={workers} "
                  f"{rec.loop_seconds:.3f}s", flush=True)
    base_w = worker_list[0]
    base_t = raw[0].loop_seconds
    return [ScalingRecord(workers=r.workers, grid=r.grid,
                          loop_seconds=r.loop_seconds,
                          normalized=r.loop_seconds / base_t,
                          ideal=base_w / r.workers)
            for r in raw]


def decompose_workers(workers: int) -> tuple[int, int, int]:
    """Split a worker count into three near-equal grid scale factors."""
    factors = [1, 1, 1]
    w = workers
    d = 2
    primes = []
    while w > 1:
        while w % d == 0:
            primes.append(d)
            w //= d
        d += 1
    for prime in sorted(primes, reverse=True):
        factors[int(np.argmin(factors))] *= prime
    return tuple(sorted(factors, reverse=True))


def weak_scaling(points_per_worker, plan_name, worker_list, iterations,
                 constants=None, repeats=1, verbose=False):
    """Fixed per-worker share: the global grid grows with the worker count
    (dims = per-worker dims times the decomposition factors); normalized
    runtimes with the flat ideal of 1."""
    constants = constants or PhysicalConstants()
    raw = []
    for workers in worker_list:
        factors = decompose_workers(workers)
        npoints = tuple(points_per_worker[a] * factors[a] for a in range(3))
        rec = _time_cell(npoints, plan_name, workers, iterations,
                         constants, repeats=repeats)
        raw.append(rec)
        if verbose:
            print(f"weak {npoints} workers={workers} "
                  f"{rec.loop_seconds:.3f}s", flush=True)
    base_t = raw[0].loop_seconds
    return [ScalingRecord(workers=r.workers, grid=r.grid,
                          loop_seconds=r.loop_seconds,
                          normalized=r.loop_seconds / base_t, ideal=1.0)
            for r in raw]


def write_scaling_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write("workers,Nx,Ny,Nz,runtime,normalized,ideal\n")
        for r in records:
            fh.write(f"{r.workers},{r.grid[0]},{r.grid[1]},{r.grid[2]},"
                     f"{r.loop_seconds:.6f},{r.normalized:.6f},"
                     f"{r.ideal:.6f}\n")
