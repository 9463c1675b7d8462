"""Command-line entry point: ``rydgrover run|trace|mecheck``.

Exit codes: 0 success, 1 usage or configuration error, 2 master-equation
cross-check failure, 3 integration fault.
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import DEFAULT_POLICY, MeasurementPolicy, aggregate, level_populations, success_probability
from .config import ConfigError, Experiment, ExperimentConfig
from .hilbert import ANCILLA_LEVEL_NAMES, LEVEL_NAMES
from .mcwf import (
    RNG_SCHEME,
    IntegrationError,
    IntegratorSettings,
    run_trajectories,
    run_trajectory,
    trajectory_rng,
)
from .mesolve import evolve_me
from .model import ModelContext

EXIT_OK, EXIT_USAGE, EXIT_MECHECK, EXIT_FAULT = 0, 1, 2, 3
ME_MAX_K = 3
Z_LIMIT = 3.0
DETERMINISTIC_TOL = 1e-6
SE_FLOOR = 1e-9


def fmt(x) -> str:
    return format(float(x), ".17g")


def _policy(cfg: ExperimentConfig) -> MeasurementPolicy:
    return MeasurementPolicy(count_rydberg=cfg.count_rydberg_as_nonzero)


def _require_seed(cfg: ExperimentConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("config key 'seed' is required")
    return cfg.seed


def _header(cfg: ExperimentConfig) -> str:
    return (f"# rng={RNG_SCHEME} seed={cfg.seed} preset={cfg.preset} k={cfg.k} "
            f"scheme={cfg.scheme} marked={cfg.marked}\n")


@dataclass
class EnsembleRun:
    stats: list
    csv: str
    runtime: float


def ensemble_stats(exp: Experiment, results, policy: MeasurementPolicy = DEFAULT_POLICY,
                   mode: str = "expectation", seed: int = 0):
    stats = []
    for m in range(exp.schedule.iterations):
        states = [r.snapshots[m] for r in results]
        rngs = None
        if mode == "sampling":
            rngs = [trajectory_rng(seed, r.trajectory_id, purpose=1 + m) for r in results]
        stats.append(aggregate(states, exp.register, policy=policy, mode=mode, rngs=rngs, iteration=m + 1))
    return stats


def ensemble_csv(cfg: ExperimentConfig, stats) -> str:
    buf = io.StringIO()
    buf.write(_header(cfg))
    buf.write("iteration,success_prob,std_err,n_traj\n")
    for s in stats:
        buf.write(f"{s.iteration},{fmt(s.success_prob)},{fmt(s.std_err)},{s.n_traj}\n")
    return buf.getvalue()


def run_ensemble(cfg: ExperimentConfig, settings: IntegratorSettings | None = None) -> EnsembleRun:
    """Trajectory ensemble with per-iteration success estimates; writes ``cfg.out`` if set."""
    seed = _require_seed(cfg)
    exp = cfg.build()
    settings = settings or IntegratorSettings()
    start = time.perf_counter()
    results = run_trajectories(exp.schedule, exp.context, seed, cfg.trajectories, settings, cfg.threads)
    stats = ensemble_stats(exp, results, _policy(cfg), cfg.estimator, seed)
    text = ensemble_csv(cfg, stats)
    _write(cfg.out, text)
    return EnsembleRun(stats, text, time.perf_counter() - start)


def trace_csv(exp: Experiment, samples) -> str:
    """Population time series plus the drive values active at each sample."""
    reg = exp.register
    k = reg.k
    cols = ["time_s"]
    for j in range(k):
        cols += [f"pop_{j}_{name}" for name in LEVEL_NAMES]
    if reg.has_ancilla:
        cols += [f"pop_a_{name}" for name in ANCILLA_LEVEL_NAMES]
    cols += ["mw_amp", "mw_phase"] + [f"det_{j}" for j in range(k)]
    cols += [f"laser_amp_{j}" for j in range(k)] + [f"laser_phase_{j}" for j in range(k)]
    if reg.has_ancilla:
        cols += ["anc_laser_amp", "anc_laser_phase"]

    starts = np.array(exp.schedule.start_times)
    segments = exp.schedule.segments
    buf = io.StringIO()
    buf.write(_header(exp.config))
    buf.write(",".join(cols) + "\n")
    for t, state in samples:
        pops = level_populations(state, reg)
        row = [fmt(t)]
        for j in range(k):
            row += [fmt(x) for x in pops[j]]
        if reg.has_ancilla:
            row += [fmt(x) for x in pops[k, :2]]
        # drive of the segment that ends at (or contains) this sample
        idx = max(int(np.searchsorted(starts, t, side="left")) - 1, 0)
        while idx < len(segments) - 1 and segments[idx].duration == 0:
            idx += 1
        d = segments[idx].drive
        row += [fmt(d.mw_amp), fmt(d.mw_phase)] + [fmt(d.detuning(j)) for j in range(k)]
        row += [fmt(d.laser_amp[j] if d.laser_amp else 0.0) for j in range(k)]
        row += [fmt(d.laser_phase[j] if d.laser_phase else 0.0) for j in range(k)]
        if reg.has_ancilla:
            row += [fmt(d.ancilla_laser_amp), fmt(d.ancilla_laser_phase)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def trace_samples(exp: Experiment, mode: str = "trajectory", points: int = 20, seed: int = 0,
                  settings: IntegratorSettings | None = None):
    settings = settings or IntegratorSettings()
    if mode == "me":
        if exp.register.k > ME_MAX_K:
            raise ConfigError(f"master-equation mode supports k <= {ME_MAX_K}")
        return evolve_me(None, exp.schedule, exp.context, settings, trace_points=points).trace
    return run_trajectory(exp.schedule, exp.context, seed, 0, settings, trace_points=points).trace


def run_trace(cfg: ExperimentConfig, settings: IntegratorSettings | None = None) -> str:
    seed = _require_seed(cfg)
    exp = cfg.build()
    samples = trace_samples(exp, cfg.trace_mode, cfg.trace_points, seed, settings)
    text = trace_csv(exp, samples)
    _write(cfg.out, text)
    return text


@dataclass
class MECheck:
    iteration: list
    me_prob: list
    mcwf_prob: list
    std_err: list
    z: list

    @property
    def passed(self) -> bool:
        return all(z <= Z_LIMIT for z in self.z)

    def report(self) -> str:
        lines = ["iteration,me_prob,mcwf_prob,std_err,z"]
        for row in zip(self.iteration, self.me_prob, self.mcwf_prob, self.std_err, self.z):
            lines.append(f"{row[0]},{fmt(row[1])},{fmt(row[2])},{fmt(row[3])},{fmt(row[4])}")
        return "\n".join(lines) + "\n"


def z_score(diff: float, se: float) -> float:
    # a jump-free ensemble has rounding-level spread; compare it deterministically
    if se > SE_FLOOR:
        return abs(diff) / se
    return 0.0 if abs(diff) < DETERMINISTIC_TOL else float("inf")


def run_mecheck(cfg: ExperimentConfig, settings: IntegratorSettings | None = None,
                mcwf_rates=None) -> MECheck:
    """Compare master-equation success probabilities with the trajectory estimate.

    ``mcwf_rates`` replaces the trajectory engine's relaxation rates only
    (sensitivity fixture for a deliberately corrupted model).
    """
    seed = _require_seed(cfg)
    if cfg.k > ME_MAX_K:
        raise ConfigError(f"mecheck supports k <= {ME_MAX_K}, got k={cfg.k}")
    exp = cfg.build()
    settings = settings or IntegratorSettings()
    policy = _policy(cfg)
    me = evolve_me(None, exp.schedule, exp.context, settings)
    me_p = [success_probability(rho, exp.register, policy=policy) for rho in me.snapshots]
    context = exp.context
    if mcwf_rates is not None:
        context = ModelContext(exp.register, mcwf_rates, exp.context.interaction, exp.context.ancilla_rates)
    results = run_trajectories(exp.schedule, context, seed, cfg.trajectories, settings, cfg.threads)
    stats = ensemble_stats(exp, results, policy, "expectation", seed)
    check = MECheck([], [], [], [], [])
    for s, p in zip(stats, me_p):
        check.iteration.append(s.iteration)
        check.me_prob.append(p)
        check.mcwf_prob.append(s.success_prob)
        check.std_err.append(s.std_err)
        check.z.append(z_score(s.success_prob - p, s.std_err))
    _write(cfg.out, check.report())
    return check


def _write(path, text):
    if path:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write output {path!r}: {exc}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rydgrover", description="Grover search with Rydberg-blockaded atoms")
    parser.add_argument("command", choices=["run", "trace", "mecheck"])
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--preset", help="a1, b1, c1, a2, b2, c2 or ideal")
    parser.add_argument("--marked")
    parser.add_argument("--k", type=int)
    parser.add_argument("--scheme", choices=["direct", "ancilla"])
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--trajectories", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--estimator", choices=["expectation", "sampling"])
    parser.add_argument("--count-rydberg-as-nonzero", action="store_true", default=None)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--trace-mode", choices=["trajectory", "me"])
    parser.add_argument("--trace-points", type=int)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = ExperimentConfig.load(args.config).to_dict() if args.config else {}
    overrides = {
        "preset": args.preset, "marked": args.marked, "k": args.k, "scheme": args.scheme,
        "iterations": args.iterations, "trajectories": args.trajectories, "seed": args.seed,
        "out": args.out, "estimator": args.estimator,
        "count_rydberg_as_nonzero": args.count_rydberg_as_nonzero, "threads": args.threads,
        "trace_mode": args.trace_mode, "trace_points": args.trace_points,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    # a new --k without --marked falls back to the default marked string
    if args.marked is None and "marked" in data and len(data["marked"]) != data.get("k", 2):
        data.pop("marked")
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "run":
            run = run_ensemble(cfg)
            for s in run.stats:
                print(f"iteration {s.iteration}: p = {s.success_prob:.4f} +/- {s.std_err:.4f} (n={s.n_traj})")
            print(f"runtime {run.runtime:.2f} s")
            if not cfg.out:
                sys.stdout.write(run.csv)
        elif args.command == "trace":
            text = run_trace(cfg)
            if not cfg.out:
                sys.stdout.write(text)
        else:
            check = run_mecheck(cfg)
            sys.stdout.write(check.report())
            print("PASS" if check.passed else f"FAIL: |z| exceeds {Z_LIMIT}")
            if not check.passed:
                return EXIT_MECHECK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"integration fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
