"""Theory-facing quantities computed from run traces.

These functions audit what the analysis promises: per-iteration expected
decrease of the improvement function, summability of squared max stepsizes,
the gradient-norm bound through its constants, and iteration counts above a
gradient tolerance for complexity sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import AlgoParams, InvalidParam, validate_params
from .oracle import TruthUnavailable


class MissingLipschitz(ValueError):
    """The problem declares no gradient Lipschitz constant."""


@dataclass(frozen=True)
class TheoryConstants:
    """Derived constants of the convergence and complexity bounds.

    c_hat bounds a gradient component by the next max stepsize; rho is the
    guaranteed expected decrease rate of the improvement function; C_grad
    relates the expected squared gradient norm to the expected squared max
    stepsize.
    """

    c_hat: float
    rho: float
    C_grad: float


@dataclass(frozen=True)
class PhiDecreaseReport:
    """Per-iteration audit of the expected improvement-function decrease."""

    checked: int
    violations: int
    rho: float
    heuristic: bool

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.checked if self.checked else 0.0


@dataclass(frozen=True)
class SummabilityReport:
    """Plateau behavior of the running sum of squared max stepsizes."""

    plateau_ratios: tuple[float, ...]
    mean_delta_last_quartile: float
    mean_delta_last_decile: float
    delta0: float


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    k_eps: int


@dataclass(frozen=True)
class SweepSummary:
    """Iteration counts above each gradient tolerance, with a log-log slope.

    slope regresses log k_eps on log(1/epsilon) over rows with a nonzero
    count; None when fewer than two such rows exist.
    """

    rows: tuple[SweepRow, ...]
    slope: Optional[float]
    mean_grad: np.ndarray


def improvement_function(
    f_val: float, f_low: float, Delta: float, nu: float, c: float, eps_f: float
) -> float:
    """Weighted gap-to-minimum plus squared max stepsize.

    nu/(c*eps_f) * (f_val - f_low) + (1 - nu) * Delta**2, the Lyapunov-style
    quantity whose conditional expected decrease drives convergence.
    """
    if f_low is None:
        raise TruthUnavailable("f_low unknown; cannot form the improvement function")
    if not 0.0 < nu < 1.0:
        raise InvalidParam("nu", "nu must lie in (0, 1)")
    if Delta < 0.0:
        raise ValueError("Delta must be >= 0")
    return nu / (c * eps_f) * (f_val - f_low) + (1.0 - nu) * Delta**2


def decrease_rate(params: AlgoParams, deterministic: bool = False) -> float:
    """Guaranteed decrease rate of the improvement function per squared stepsize.

    The stochastic rate is beta^2/2 * min{nu*(gamma-2)*eta^2,
    (1-nu)*(1-theta^2)}; the deterministic analogue drops the beta^2/2 factor.
    """
    if params.nu is None:
        raise InvalidParam("nu", "nu must be set to evaluate the decrease rate")
    m = min(
        params.nu * (params.gamma - 2.0) * params.eta**2,
        (1.0 - params.nu) * (1.0 - params.theta**2),
    )
    if deterministic:
        return m
    return 0.5 * params.beta**2 * m


def theory_constants(params: AlgoParams, problem) -> TheoryConstants:
    """Evaluate the bound constants for a problem with known gradient Lipschitz L."""
    L = getattr(problem, "L", None)
    if L is None:
        raise MissingLipschitz(f"problem {getattr(problem, 'name', '?')!r} has no L")
    n = problem.dim
    c_hat = params.c * params.eps_f * (params.gamma + 2.0) + L * (math.sqrt(n) + 1.0)
    rho = decrease_rate(params)
    C_grad = (
        6.0 * n * c_hat**2
        + 12.0 * n * params.c**2 * params.eps_f**2 * (1.0 - params.beta) / params.theta**2
    )
    return TheoryConstants(c_hat=c_hat, rho=rho, C_grad=C_grad)


def _phi_series(run) -> np.ndarray:
    phis = []
    for t in run.trace:
        if t.truth is None or t.truth.phi is None:
            raise TruthUnavailable("trace lacks improvement-function values")
        phis.append(t.truth.phi)
    return np.asarray(phis)


def _delta_series(run) -> np.ndarray:
    return np.asarray([t.Delta for t in run.trace])


def phi_decrease_audit(
    runs: Sequence, params: AlgoParams, atol: float = 1e-12
) -> PhiDecreaseReport:
    """Check the expected improvement-function decrease across a seed ensemble.

    For each iteration k the per-seed excess phi_{k+1} - phi_k + rho*Delta_k^2
    is averaged over seeds; a violation is an average above twice its standard
    error (plus atol). The report is labeled heuristic when the parameters do
    not pass strict validation, since the guarantee only covers that regime.
    """
    if not runs:
        return PhiDecreaseReport(checked=0, violations=0, rho=0.0, heuristic=False)
    rho = decrease_rate(params)
    try:
        validate_params(replace(params, strict_beta=True), runs[0].trace[0].x.size)
        heuristic = False
    except InvalidParam:
        heuristic = True

    horizon = min(len(r.trace) for r in runs)
    if horizon < 2:
        return PhiDecreaseReport(checked=0, violations=0, rho=rho, heuristic=heuristic)

    excesses = []
    for r in runs:
        phi = _phi_series(r)[:horizon]
        delta = _delta_series(r)[:horizon]
        excesses.append(np.diff(phi) + rho * delta[:-1] ** 2)
    data = np.vstack(excesses)  # seeds x (horizon-1)
    mean = data.mean(axis=0)
    if data.shape[0] > 1:
        se = data.std(axis=0, ddof=1) / math.sqrt(data.shape[0])
    else:
        se = np.zeros_like(mean)
    violations = int(np.sum(mean > 2.0 * se + atol))
    return PhiDecreaseReport(
        checked=int(mean.size), violations=violations, rho=rho, heuristic=heuristic
    )


def delta_summability(runs: Sequence) -> SummabilityReport:
    """Plateau diagnostics for the running sums of squared max stepsizes."""
    if len(runs) < 2:
        raise ValueError("need at least 2 seeds for the summability report")
    ratios = []
    quartile_means = []
    decile_means = []
    delta0s = []
    for r in runs:
        delta = _delta_series(r)
        if delta.size == 0:
            raise ValueError("empty trace in ensemble")
        sq = delta**2
        total = float(sq.sum())
        cut_q = (3 * delta.size) // 4
        cut_d = (9 * delta.size) // 10
        ratios.append(float(sq[cut_q:].sum()) / total if total > 0 else 0.0)
        quartile_means.append(float(delta[cut_q:].mean()))
        decile_means.append(float(delta[cut_d:].mean()))
        delta0s.append(float(delta[0]))
    return SummabilityReport(
        plateau_ratios=tuple(ratios),
        mean_delta_last_quartile=float(np.mean(quartile_means)),
        mean_delta_last_decile=float(np.mean(decile_means)),
        delta0=float(np.mean(delta0s)),
    )


def grad_norm_curve(runs: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and standard error of the true gradient norm per iteration.

    All runs must share the same horizon.
    """
    if not runs:
        raise ValueError("need at least one run")
    horizons = {len(r.trace) for r in runs}
    if len(horizons) != 1:
        raise ValueError(f"runs must share one horizon, got lengths {sorted(horizons)}")
    curves = []
    for r in runs:
        norms = []
        for t in r.trace:
            if t.truth is None:
                raise TruthUnavailable("trace lacks ground-truth gradient norms")
            norms.append(t.truth.grad_norm)
        curves.append(norms)
    data = np.asarray(curves)
    mean = data.mean(axis=0)
    if data.shape[0] > 1:
        se = data.std(axis=0, ddof=1) / math.sqrt(data.shape[0])
    else:
        se = np.zeros_like(mean)
    return mean, se


def k_epsilon(runs: Sequence, epsilon: float) -> int:
    """Number of iterations whose ensemble-mean gradient norm exceeds epsilon."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be > 0")
    mean, _ = grad_norm_curve(runs)
    return int(np.sum(mean > epsilon))


def sweep_summary(runs: Sequence, epsilons: Sequence[float]) -> SweepSummary:
    """k_epsilon at each tolerance plus the log-log slope against 1/epsilon."""
    mean, _ = grad_norm_curve(runs)
    rows = tuple(
        SweepRow(epsilon=float(e), k_eps=int(np.sum(mean > e)))
        for e in sorted(epsilons, reverse=True)
    )
    valid = [(r.epsilon, r.k_eps) for r in rows if r.k_eps > 0]
    slope = None
    if len(valid) >= 2:
        xs = np.log([1.0 / e for e, _ in valid])
        ys = np.log([k for _, k in valid])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return SweepSummary(rows=rows, slope=slope, mean_grad=mean)


@dataclass(frozen=True)
class GradientBoundReport:
    """Empirical check of mean squared gradient norm against C_grad * mean Delta_{k+1}^2."""

    checked: int
    violations: int
    C_grad: float

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.checked if self.checked else 0.0


def gradient_bound_audit(runs: Sequence, constants: TheoryConstants) -> GradientBoundReport:
    """Check the squared-gradient bound on an ensemble, two standard errors slack."""
    if not runs:
        return GradientBoundReport(checked=0, violations=0, C_grad=constants.C_grad)
    horizon = min(len(r.trace) for r in runs)
    if horizon < 2:
        return GradientBoundReport(checked=0, violations=0, C_grad=constants.C_grad)
    excesses = []
    for r in runs:
        g2 = []
        for t in r.trace[:horizon]:
            if t.truth is None:
                raise TruthUnavailable("trace lacks ground-truth gradient norms")
            g2.append(t.truth.grad_norm**2)
        g2 = np.asarray(g2)
        d2_next = _delta_series(r)[:horizon] ** 2
        excesses.append(g2[:-1] - constants.C_grad * d2_next[1:])
    data = np.vstack(excesses)
    mean = data.mean(axis=0)
    if data.shape[0] > 1:
        se = data.std(axis=0, ddof=1) / math.sqrt(data.shape[0])
    else:
        se = np.zeros_like(mean)
    violations = int(np.sum(mean > 2.0 * se))
    return GradientBoundReport(
        checked=int(mean.size), violations=violations, C_grad=constants.C_grad
    )
