"""Command-line entry point.

Modes:
    run       integrate the Taylor-Green vortex, write timeseries.csv
    validate  run all five plans on the same case and report the maximum
              cross-plan deviation of the conservative fields
    bench     per-variant timing table -> bench.csv, speedup.csv
    scaling   strong or weak worker sweep -> scaling.csv

Configuration: defaults (2*pi cube, M=0.1, Pr=0.71, Re=1600, 64^3,
dt=3.385e-3 with the halve-per-8x-points rule for other grids) < config
file (key=value lines) < command-line flags.  The resolved configuration
is echoed to <out>/config.resolved, which can itself be fed back via
--config to reproduce a run.

Exit codes: 0 ok, 2 usage error, 3 solver divergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bench, diagnostics, timeloop
from .mesh import ConfigurationError, make_grid
from .physics import PhysicalConstants, SolverDivergenceError
from .plan import PLAN_NAMES, ResidualEvaluator

TWO_PI = 2.0 * np.pi

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

VALIDATE_TOLERANCE = 1e-10


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "run"
    grid: tuple[int, int, int] = (64, 64, 64)
    plan: str = "ss"  # best-performing variant is the default
    gamma: float = 1.4
    mach: float = 0.1
    pr: float = 0.71
    re: float = 1600.0
    dt: float | None = None   # None -> auto rule
    iterations: int = 500
    workers: int = 1
    cadence: int = 10
    out: str = "."

    def resolved_dt(self) -> float:
        return self.dt if self.dt is not None else bench.auto_dt(self.grid)

    def constants(self) -> PhysicalConstants:
        return PhysicalConstants(gamma=self.gamma, M=self.mach, Pr=self.pr,
                                 Re=self.re)

    def resolved_text(self) -> str:
        lines = [f"mode={self.mode}",
                 f"grid={self.grid[0]},{self.grid[1]},{self.grid[2]}",
                 f"plan={self.plan}",
                 f"gamma={self.gamma:.17g}",
                 f"mach={self.mach:.17g}",
                 f"pr={self.pr:.17g}",
                 f"re={self.re:.17g}",
                 f"dt={self.resolved_dt():.17g}",
                 f"iterations={self.iterations}",
                 f"workers={self.workers}",
                 f"cadence={self.cadence}",
                 f"out={self.out}"]
        return "\n".join(lines) + "\n"


def _parse_key_value(path: str) -> dict[str, str]:
    values = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(
                        f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
    except OSError as err:
        raise UsageError(f"cannot read config file {path}: {err}") from err
    return values


def _parse_grid(text: str) -> tuple[int, int, int]:
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        nums = [int(p) for p in parts]
    except ValueError as err:
        raise UsageError(f"grid: malformed value {text!r}") from err
    if len(nums) == 1:
        nums = nums * 3
    if len(nums) != 3:
        raise UsageError(f"grid: expected 1 or 3 integers, got {text!r}")
    return tuple(nums)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdns",
        description="Compressible Navier-Stokes finite-difference solver "
                    "with selectable kernel storage plans.")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--mode",
                        choices=["run", "validate", "bench", "scaling"])
    parser.add_argument("--grid", help="interior points: N or Nx,Ny,Nz")
    parser.add_argument("--plan",
                        help=f"one of {', '.join(p.lower() for p in PLAN_NAMES)}")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--auto-dt", action="store_true",
                        help="derive dt from the grid (64^3 reference "
                             "value halved per 8x point increase)")
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--re", type=float)
    parser.add_argument("--mach", type=float)
    parser.add_argument("--pr", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--out")
    parser.add_argument("--cadence", type=int)
    parser.add_argument("--scaling-kind", choices=["strong", "weak"],
                        default=None,
                        help="scaling mode sweep type (default strong)")
    parser.add_argument("--worker-list", default=None,
                        help="comma-separated worker counts for scaling "
                             "(default 1,2,4,8)")
    parser.add_argument("--bench-grids", default=None,
                        help="comma-separated cube sizes for bench mode "
                             "(default 32,48,64,96)")
    return parser


_FILE_KEYS = {
    "mode": str, "grid": _parse_grid, "plan": str, "gamma": float,
    "mach": float, "pr": float, "re": float, "dt": float,
    "iterations": int, "workers": int, "cadence": int, "out": str,
}


def parse_config(argv) -> tuple[RunConfig, argparse.Namespace]:
    """Resolve flags over config-file values over defaults."""
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    config = RunConfig()

    if args.config:
        for key, raw in _parse_key_value(args.config).items():
            if key not in _FILE_KEYS:
                raise UsageError(f"config file: unknown key {key!r}")
            try:
                setattr(config, key, _FILE_KEYS[key](raw))
            except UsageError:
                raise
            except ValueError as err:
                raise UsageError(f"config file: malformed value for "
                                 f"{key}: {raw!r}") from err

    if args.mode:
        config.mode = args.mode
    if args.grid:
        config.grid = _parse_grid(args.grid)
    if args.plan:
        config.plan = args.plan
    for key in ("gamma", "mach", "pr", "re", "iterations", "workers",
                "cadence", "out"):
        value = getattr(args, key)
        if value is not None:
            setattr(config, key, value)
    if args.dt is not None and args.auto_dt:
        raise UsageError("dt: --dt and --auto-dt are mutually exclusive")
    if args.dt is not None:
        config.dt = args.dt
    elif args.auto_dt:
        config.dt = None

    if config.plan.upper() not in PLAN_NAMES:
        raise UsageError(
            f"plan: unknown plan {config.plan!r}; choose one of "
            f"{{{', '.join(p.lower() for p in PLAN_NAMES)}}}")
    if config.resolved_dt() <= 0:
        raise UsageError("dt: must be positive")
    if config.iterations < 0:
        raise UsageError("iterations: must be >= 0")
    if config.workers < 1:
        raise UsageError("workers: must be >= 1")
    return config, args


def _write_resolved(config: RunConfig):
    os.makedirs(config.out, exist_ok=True)
    with open(os.path.join(config.out, "config.resolved"), "w") as fh:
        fh.write(config.resolved_text())


def _mode_run(config: RunConfig) -> int:
    grid = make_grid(config.grid, (TWO_PI,) * 3)
    constants = config.constants()
    state = diagnostics.taylor_green_init(grid, constants)
    rho0 = diagnostics.mean_density(state)
    evaluator = ResidualEvaluator(grid, constants, config.plan,
                                  workers=config.workers)
    scheme = timeloop.RKScheme(dt=config.resolved_dt())
    collect = diagnostics.make_collector(grid, rho0)
    report = timeloop.run(state, scheme, evaluator, config.iterations,
                          cadence=config.cadence, collect=collect,
                          progress=True)
    diagnostics.write_timeseries(
        report.records, os.path.join(config.out, "timeseries.csv"))
    print(f"iteration loop: {report.loop_seconds:.3f} s for "
          f"{config.iterations} iterations")
    return EXIT_OK


def _mode_validate(config: RunConfig) -> int:
    grid = make_grid(config.grid, (TWO_PI,) * 3)
    constants = config.constants()
    scheme = timeloop.RKScheme(dt=config.resolved_dt())
    finals = {}
    for name in PLAN_NAMES:
        state = diagnostics.taylor_green_init(grid, constants)
        evaluator = ResidualEvaluator(grid, constants, name,
                                      workers=config.workers)
        timeloop.run(state, scheme, evaluator, config.iterations)
        finals[name] = [f.interior.copy() for f in state.conservative]
    worst = 0.0
    for name in PLAN_NAMES:
        for a, b in zip(finals[name], finals["BL"]):
            scale = np.max(np.abs(b))
            if scale > 0:
                worst = max(worst, float(np.max(np.abs(a - b)) / scale))
    print(f"max cross-plan relative deviation over {config.iterations} "
          f"iterations on {config.grid}: {worst:.3e} "
          f"(tolerance {VALIDATE_TOLERANCE:g})")
    if worst <= VALIDATE_TOLERANCE:
        print("validate: PASS")
        return EXIT_OK
    print("validate: FAIL")
    return 1


def _mode_bench(config: RunConfig, args) -> int:
    sizes = ([int(n) for n in args.bench_grids.split(",")]
             if args.bench_grids else [32, 48, 64, 96])
    grids = [(n, n, n) for n in sizes]
    records = bench.bench_variants(grids, iterations=config.iterations,
                                   workers=config.workers,
                                   constants=config.constants(),
                                   verbose=True)
    bench.write_bench_csv(records, os.path.join(config.out, "bench.csv"))
    bench.write_speedup_csv(records, os.path.join(config.out, "speedup.csv"))
    workers = ([int(w) for w in args.worker_list.split(",")]
               if args.worker_list else [1, 2, 4, 8])
    scaling = bench.strong_scaling(grids[0], config.plan, workers,
                                   config.iterations,
                                   constants=config.constants())
    bench.write_scaling_csv(scaling, os.path.join(config.out, "scaling.csv"))
    return EXIT_OK


def _mode_scaling(config: RunConfig, args) -> int:
    kind = args.scaling_kind or "strong"
    workers = ([int(w) for w in args.worker_list.split(",")]
               if args.worker_list else [1, 2, 4, 8])
    if kind == "strong":
        records = bench.strong_scaling(config.grid, config.plan, workers,
                                       config.iterations,
                                       constants=config.constants(),
                                       verbose=True)
    else:
        records = bench.weak_scaling(config.grid, config.plan, workers,
                                     config.iterations,
                                     constants=config.constants(),
                                     verbose=True)
    bench.write_scaling_csv(records, os.path.join(config.out, "scaling.csv"))
    return EXIT_OK


def run_main(argv=None) -> int:
    try:
        config, args = parse_config(argv)
    except UsageError as err:
        print(f"fdns: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _write_resolved(config)
        if config.mode == "run":
            return _mode_run(config)
        if config.mode == "validate":
            return _mode_validate(config)
        if config.mode == "bench":
            return _mode_bench(config, args)
        return _mode_scaling(config, args)
    except ConfigurationError as err:
        print(f"fdns: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SolverDivergenceError as err:
        print(f"fdns: solver diverged: {err} (iteration {err.iteration}, "
              f"substep {err.substep})", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as err:
        print(f"fdns: I/O error: {err}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(run_main())


if __name__ == "__main__":
    main()
