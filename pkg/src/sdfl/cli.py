"""Command-line experiment harness.

Commands: run (single or seed ensemble, trace CSVs + JSON summaries), sweep
(iteration counts above a gradient-tolerance grid, with a log-log slope),
audit-oracle (empirical accuracy rate of the estimator on a delta grid), and
validate-params. Configuration comes from a TOML file with flag overrides;
outputs carry no timestamps so identical configs reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 path
    import tomli as tomllib

from .core import AlgoParams, InvalidParam, validate_params
from .diagnostics import sweep_summary
from .oracle import (
    OracleFailure,
    TruthUnavailable,
    empirical_accuracy_rate,
    required_samples,
)
from .optimizer import RunResult, run
from .problems import NoiseModel, UnknownProblem, make_problem

logger = logging.getLogger("sdfl")

TRACE_COLUMNS = (
    "k",
    "Delta",
    "delta",
    "p_samples",
    "nF",
    "success",
    "safeguard_hits",
    "f_true",
    "grad_norm",
    "phi",
)


class ConfigError(ValueError):
    """The run configuration is unusable."""


@dataclass
class RunConfig:
    """Everything one experiment needs, assembled from defaults, file, flags."""

    problem: str = "sphere"
    dim: int = 2
    kappa: float = 10.0
    noise: str = "none"
    seeds: tuple[int, ...] = (0,)
    out: str = "results"
    workers: int = 1
    x0: Optional[tuple[float, ...]] = None
    alpha0: Optional[tuple[float, ...]] = None
    params: AlgoParams = field(default_factory=AlgoParams)
    epsilons: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    audit_deltas: tuple[float, ...] = (1.0, 0.5, 0.25)
    audit_trials: int = 10_000

    def build_problem(self):
        noise = NoiseModel.parse(self.noise)
        kwargs = {"kappa": self.kappa} if self.problem == "quadratic" else {}
        return make_problem(self.problem, dim=self.dim, noise=noise, **kwargs)


def _parse_seeds(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, _, hi = text.partition("..")
        seeds = tuple(range(int(lo), int(hi) + 1))
    elif "," in text:
        seeds = tuple(int(s) for s in text.split(","))
    else:
        seeds = (int(text),)
    if not seeds:
        raise ConfigError("seed list is empty")
    return seeds


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.split(","))


def load_config(path: Optional[str], args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the optional TOML file, and CLI flags (flags win)."""
    cfg = RunConfig()
    if path:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        prob = doc.get("problem", {})
        cfg.problem = prob.get("name", cfg.problem)
        cfg.dim = int(prob.get("dim", cfg.dim))
        cfg.kappa = float(prob.get("kappa", cfg.kappa))
        cfg.noise = prob.get("noise", cfg.noise)
        if "x0" in prob:
            cfg.x0 = tuple(float(v) for v in prob["x0"])
        if "alpha0" in prob:
            cfg.alpha0 = tuple(float(v) for v in prob["alpha0"])
        par = doc.get("params", {})
        known = {f.name for f in dataclasses.fields(AlgoParams)}
        bad = set(par) - known
        if bad:
            raise ConfigError(f"unknown [params] keys: {sorted(bad)}")
        cfg.params = dataclasses.replace(cfg.params, **par)
        runsec = doc.get("run", {})
        seeds = runsec.get("seeds")
        if seeds is not None:
            cfg.seeds = (
                _parse_seeds(seeds)
                if isinstance(seeds, str)
                else tuple(int(s) for s in seeds)
            )
        cfg.out = runsec.get("out", cfg.out)
        cfg.workers = int(runsec.get("workers", cfg.workers))
        sweep = doc.get("sweep", {})
        if "epsilons" in sweep:
            cfg.epsilons = tuple(float(e) for e in sweep["epsilons"])
        audit = doc.get("audit", {})
        if "deltas" in audit:
            cfg.audit_deltas = tuple(float(d) for d in audit["deltas"])
        cfg.audit_trials = int(audit.get("trials", cfg.audit_trials))

    if args.problem is not None:
        cfg.problem = args.problem
    if args.dim is not None:
        cfg.dim = args.dim
    if args.kappa is not None:
        cfg.kappa = args.kappa
    if args.noise is not None:
        cfg.noise = args.noise
    if args.seed is not None:
        cfg.seeds = (args.seed,)
    if args.seeds is not None:
        cfg.seeds = _parse_seeds(args.seeds)
    if args.out is not None:
        cfg.out = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if args.x0 is not None:
        cfg.x0 = _parse_floats(args.x0)
    if args.alpha0 is not None:
        cfg.alpha0 = _parse_floats(args.alpha0)
    if getattr(args, "epsilons", None) is not None:
        cfg.epsilons = _parse_floats(args.epsilons)
    if getattr(args, "deltas", None) is not None:
        cfg.audit_deltas = _parse_floats(args.deltas)
    if getattr(args, "trials", None) is not None:
        cfg.audit_trials = args.trials

    overrides = {}
    for name in (
        "theta",
        "gamma",
        "c",
        "eps_f",
        "eta",
        "beta",
        "nu",
        "max_iters",
        "max_evals",
        "delta_tol",
        "max_doublings",
        "p_max",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.strict_beta:
        overrides["strict_beta"] = True
    if overrides:
        cfg.params = dataclasses.replace(cfg.params, **overrides)

    if not cfg.seeds:
        raise ConfigError("seed list is empty")
    if any(s < 0 for s in cfg.seeds):
        raise ConfigError("seeds must be >= 0")
    return cfg


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_trace_csv(path: Path, result: RunResult) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for t in result.trace:
        truth = t.truth
        row = (
            t.k,
            t.Delta,
            t.delta,
            t.samples_per_estimate,
            t.nF_cumulative,
            t.successful,
            sum(d.safeguard_hit for d in t.per_direction),
            truth.f_true if truth else None,
            truth.grad_norm if truth else None,
            truth.phi if truth else None,
        )
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _summary_dict(cfg: RunConfig, seed: int, result: RunResult) -> dict:
    problem = cfg.build_problem()
    final_f = (
        float(problem.f_true(result.final_x)) if problem.f_true is not None else None
    )
    return {
        "problem": cfg.problem,
        "dim": cfg.dim,
        "noise": cfg.noise,
        "seed": seed,
        "final_x": [float(v) for v in result.final_x],
        "final_f_true": final_f,
        "iterations": result.iterations,
        "nF_total": result.nF_total,
        "stop_reason": result.stop_reason.value,
        "safeguard_hits": result.safeguard_hits,
        "clamped_iterations": result.clamped_iterations,
    }


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _run_seed(cfg: RunConfig, seed: int) -> RunResult:
    problem = cfg.build_problem()
    x0 = np.asarray(cfg.x0, dtype=float) if cfg.x0 is not None else None
    alpha0 = np.asarray(cfg.alpha0, dtype=float) if cfg.alpha0 is not None else None
    return run(problem, cfg.params, seed, x0=x0, alpha0=alpha0)


def _ensemble_worker(payload: tuple[RunConfig, int]) -> tuple[int, RunResult]:
    cfg, seed = payload
    return seed, _run_seed(cfg, seed)


def run_ensemble(cfg: RunConfig) -> dict[int, RunResult]:
    """Run every seed, in order, optionally fanning out across processes."""
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = dict(pool.map(_ensemble_worker, [(cfg, s) for s in cfg.seeds]))
    else:
        results = {seed: _run_seed(cfg, seed) for seed in cfg.seeds}
    for seed, result in results.items():
        if result.clamped_iterations:
            logger.warning(
                "seed %d: sample count clamped at p_max on %d iterations; "
                "accuracy guarantee does not cover those",
                seed,
                result.clamped_iterations,
            )
    return results


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_ensemble(cfg)
    summaries = []
    trace_files = []
    for seed in cfg.seeds:
        result = results[seed]
        trace_path = out / f"trace_{cfg.problem}_seed{seed}.csv"
        write_trace_csv(trace_path, result)
        trace_files.append(trace_path.name)
        summary = _summary_dict(cfg, seed, result)
        summaries.append(summary)
        logger.info(
            "seed %d: stop=%s iters=%d nF=%d",
            seed,
            result.stop_reason.value,
            result.iterations,
            result.nF_total,
        )
    if len(cfg.seeds) == 1:
        _write_json(out / f"summary_{cfg.problem}_seed{cfg.seeds[0]}.json", summaries[0])
    else:
        _write_json(
            out / f"ensemble_{cfg.problem}.json",
            {"trace_files": trace_files, "per_seed": summaries},
        )
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    if len(cfg.epsilons) < 3:
        raise ConfigError("sweep needs at least 3 epsilon values")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_ensemble(cfg)
    runs = [results[s] for s in cfg.seeds]
    summary = sweep_summary(runs, cfg.epsilons)
    curve_path = out / f"mean_grad_{cfg.problem}.csv"
    lines = ["k,mean_grad_norm"]
    lines += [f"{k},{repr(float(g))}" for k, g in enumerate(summary.mean_grad)]
    curve_path.write_text("\n".join(lines) + "\n")
    _write_json(
        out / f"sweep_{cfg.problem}.json",
        {
            "rows": [{"epsilon": r.epsilon, "k_eps": r.k_eps} for r in summary.rows],
            "slope": summary.slope,
            "seeds": list(cfg.seeds),
            "horizon": len(summary.mean_grad),
            "mean_grad_curve": curve_path.name,
        },
    )
    if summary.slope is None:
        logger.warning("slope undefined: fewer than two epsilons with k_eps > 0")
    return 0


def cmd_audit_oracle(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = cfg.build_problem()
    if problem.f_true is None:
        raise TruthUnavailable("oracle audit needs a problem with known truth")
    params = cfg.params
    x = np.asarray(cfg.x0, dtype=float) if cfg.x0 is not None else problem.x0
    rows = []
    for j, delta in enumerate(cfg.audit_deltas):
        size = required_samples(
            problem.V, params.c, params.eps_f, params.beta, delta, p_max=params.p_max
        )
        stream = np.random.default_rng([cfg.seeds[0], j])
        rate = empirical_accuracy_rate(
            problem, x, params.c, params.eps_f, delta, size.count, cfg.audit_trials, stream
        )
        rows.append(
            {
                "delta": delta,
                "p": size.count,
                "clamped": size.clamped,
                "rate": rate,
                "threshold": params.c * params.eps_f * delta**2,
            }
        )
    _write_json(
        out / f"audit_{cfg.problem}.json",
        {
            "beta": params.beta,
            "trials": cfg.audit_trials,
            "V": problem.V,
            "rows": rows,
        },
    )
    return 0


def cmd_validate_params(cfg: RunConfig) -> int:
    report = validate_params(cfg.params, cfg.dim)
    for check in report.checks:
        status = "ok" if check.passed else ("FAIL" if check.hard else "warn")
        print(f"{status:4s} {check.name}: {check.constraint}")
    print(f"nu_min = {report.nu_min!r}")
    print(f"beta_min = {report.beta_min!r}")
    print(f"beta_min_lenient = {report.beta_min_lenient!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdfl",
        description="Derivative-free linesearch optimization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--problem", default=None)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--kappa", type=float, default=None)
        p.add_argument("--noise", default=None, help="KIND:PARAM, e.g. gaussian:0.01")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--seeds", default=None, help="range A..B or comma list")
        p.add_argument("--out", default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--x0", default=None, help="comma-separated start point")
        p.add_argument("--alpha0", default=None, help="comma-separated initial steps")
        p.add_argument("--strict-beta", dest="strict_beta", action="store_true")
        for name in ("theta", "gamma", "c", "eps_f", "eta", "beta", "nu", "delta_tol"):
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, default=None)
        for name in ("max_iters", "max_evals", "max_doublings", "p_max"):
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int, default=None)

    p_run = sub.add_parser("run", help="single run or seed ensemble")
    common(p_run)

    p_sweep = sub.add_parser("sweep", help="gradient-tolerance sweep over an ensemble")
    common(p_sweep)
    p_sweep.add_argument("--epsilons", default=None, help="comma-separated tolerances")

    p_audit = sub.add_parser("audit-oracle", help="estimate accuracy-rate audit")
    common(p_audit)
    p_audit.add_argument("--deltas", default=None, help="comma-separated precision grid")
    p_audit.add_argument("--trials", type=int, default=None)

    p_val = sub.add_parser("validate-params", help="check tunables and print bounds")
    common(p_val)

    return parser


_COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "audit-oracle": cmd_audit_oracle,
    "validate-params": cmd_validate_params,
}

_CONFIG_ERRORS = (
    ConfigError,
    UnknownProblem,
    InvalidParam,
    OSError,
    tomllib.TOMLDecodeError,
    ValueError,
)

_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("SDFL_LOG", "WARNING").upper()
    logging.basicConfig(
        level=level if level in _LOG_LEVELS else "WARNING",
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        return _COMMANDS[args.command](cfg)
    except _CONFIG_ERRORS as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OracleFailure, TruthUnavailable) as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
