"""Parameter and state types shared by the optimizer, oracle, and diagnostics.

Everything here is an immutable value object: construct once, share freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class InvalidParam(ValueError):
    """A tunable violates its validity constraint."""

    def __init__(self, name: str, constraint: str):
        super().__init__(f"{name}: {constraint}")
        self.name = name
        self.constraint = constraint


class NonPositiveStep(ValueError):
    """A tentative stepsize is zero or negative."""


@dataclass(frozen=True)
class AlgoParams:
    """Tunables of the optimizer and its sampling layer.

    theta: contraction factor applied to stepsizes after a failed sweep, in (0,1).
    gamma: sufficient-decrease multiplier, > 2.
    c, eps_f: accuracy scales; the acceptance threshold is gamma*c*eps_f*step**2
        and an estimate is deemed accurate within c*eps_f*delta**2.
    eta: coupling of per-coordinate stepsizes to the largest one, in (0,1].
    beta: target probability that a single estimate is accurate, in (0,1).
    nu: weight of the improvement function tracked by diagnostics; None disables
        that tracking.
    max_iters / max_evals / delta_tol: stopping rules (iteration cap, estimate
        budget, smallest useful stepsize).
    max_doublings: safeguard cap on expansion rounds within one linesearch.
    p_max: clamp on the per-estimate sample count.
    strict_beta: escalate the nu/beta adequacy checks from warnings to errors.
    """

    theta: float = 0.5
    gamma: float = 6.0
    c: float = 1.0
    eps_f: float = 0.1
    eta: float = 1.0
    beta: float = 0.8
    nu: Optional[float] = 0.9
    max_iters: int = 1000
    max_evals: int = 10_000_000
    delta_tol: float = 1e-6
    max_doublings: int = 60
    p_max: int = 1_000_000
    strict_beta: bool = False


@dataclass(frozen=True)
class ParamCheck:
    name: str
    passed: bool
    constraint: str
    hard: bool


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_params: per-constraint results plus derived bounds.

    nu_min is the smallest admissible improvement-function weight for the given
    gamma. beta_min solves beta^2/(1-beta^2) = 4*nu/min{nu*(gamma-2)*eta^2,
    (1-nu)*(1-theta^2)}; beta_min_lenient uses 2*nu in the numerator. Both are
    None when nu is unset or out of range.
    """

    checks: tuple[ParamCheck, ...]
    nu_min: float
    beta_min: Optional[float]
    beta_min_lenient: Optional[float]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def warnings(self) -> tuple[ParamCheck, ...]:
        return tuple(c for c in self.checks if not c.passed and not c.hard)


@dataclass(frozen=True)
class StepState:
    """Per-coordinate stepsizes at the start of one iteration.

    working[i] = max(tentative[i], eta * max_j tentative[j]); Delta is the
    largest tentative entry and delta the smallest working entry, so
    eta * Delta <= delta <= Delta whenever eta <= 1.
    """

    tentative: np.ndarray
    working: np.ndarray
    Delta: float
    delta: float


@dataclass(frozen=True)
class DirectionOutcome:
    """What happened along one coordinate during a sweep.

    p_sign is +1/-1 for the accepted probe direction and None when both probes
    failed (then alpha == 0). An accepted step is always alpha ==
    2**doublings * bar_alpha. safeguard_hit marks an expansion stopped by the
    doubling cap rather than by its own test.
    """

    i: int
    p_sign: Optional[int]
    alpha: float
    bar_alpha: float
    doublings: int
    opposite_tried: bool
    safeguard_hit: bool

    def evals_used(self) -> int:
        """Estimate computations this direction consumed.

        Two probes always run; the opposite probe adds one; an entered
        linesearch adds one per accepted doubling plus the final rejected
        trial, which is skipped when the safeguard fires.
        """
        n = 2 + int(self.opposite_tried)
        if self.p_sign is not None:
            n += self.doublings + (0 if self.safeguard_hit else 1)
        return n


@dataclass(frozen=True)
class TruthInfo:
    """Ground-truth quantities at an iterate, available on benchmark problems."""

    f_true: float
    grad_norm: float
    phi: Optional[float]


@dataclass(frozen=True)
class IterationTrace:
    """Everything observable about one iteration."""

    k: int
    x: np.ndarray
    Delta: float
    delta: float
    successful: bool
    per_direction: tuple[DirectionOutcome, ...]
    nF_cumulative: int
    samples_per_estimate: int
    p_clamped: bool = False
    truth: Optional[TruthInfo] = None

    def evals_used(self) -> int:
        return sum(d.evals_used() for d in self.per_direction)


def nu_lower_bound(gamma: float) -> float:
    """Smallest admissible improvement-function weight: 1/(1+(gamma-2)/4)."""
    return 1.0 / (1.0 + (gamma - 2.0) / 4.0)


def beta_lower_bound(
    nu: float, gamma: float, eta: float, theta: float, factor: float = 4.0
) -> float:
    """Accuracy probability needed for guaranteed expected improvement decrease.

    Solves beta^2/(1-beta^2) = factor*nu / min{nu*(gamma-2)*eta^2,
    (1-nu)*(1-theta^2)} for beta. factor=4 is the binding requirement; the
    stated (lenient) variant uses factor=2.
    """
    m = min(nu * (gamma - 2.0) * eta**2, (1.0 - nu) * (1.0 - theta**2))
    r = factor * nu / m
    return math.sqrt(r / (1.0 + r))


def validate_params(params: AlgoParams, n: int) -> ValidationReport:
    """Check every constraint on params for a problem of dimension n.

    Hard constraints (theta, gamma, c, eps_f, eta, the counters) raise
    InvalidParam. The nu-range and beta-adequacy checks are recorded as
    warnings unless params.strict_beta is set, in which case they raise too.
    Returns the full per-constraint report together with the derived nu and
    beta lower bounds.
    """
    checks: list[ParamCheck] = []

    def hard(name: str, passed: bool, constraint: str) -> None:
        checks.append(ParamCheck(name, passed, constraint, hard=True))
        if not passed:
            raise InvalidParam(name, constraint)

    def soft(name: str, passed: bool, constraint: str) -> None:
        is_hard = params.strict_beta
        checks.append(ParamCheck(name, passed, constraint, hard=is_hard))
        if not passed and is_hard:
            raise InvalidParam(name, constraint)

    hard("n", n >= 1, "dimension must be >= 1")
    hard("theta", 0.0 < params.theta < 1.0, "theta must lie in (0, 1)")
    hard("gamma", params.gamma > 2.0, "gamma must be > 2")
    hard("c", params.c > 0.0, "c must be > 0")
    hard("eps_f", params.eps_f > 0.0, "eps_f must be > 0")
    hard("eta", 0.0 < params.eta <= 1.0, "eta must lie in (0, 1]")
    hard("max_iters", params.max_iters >= 0, "max_iters must be >= 0")
    hard("max_evals", params.max_evals >= 0, "max_evals must be >= 0")
    hard("delta_tol", params.delta_tol >= 0.0, "delta_tol must be >= 0")
    hard("max_doublings", params.max_doublings >= 1, "max_doublings must be >= 1")
    hard("p_max", params.p_max >= 1, "p_max must be >= 1")
    hard("beta", 0.0 < params.beta < 1.0, "beta must lie in (0, 1)")

    nu_min = nu_lower_bound(params.gamma)
    beta_min = None
    beta_min_lenient = None

    if params.nu is None:
        soft(
            "nu",
            not params.strict_beta,
            "nu must be set for the strict beta adequacy check",
        )
    else:
        nu_ok = nu_min < params.nu < 1.0
        soft(
            "nu",
            nu_ok,
            f"nu must lie in ({nu_min:.6g}, 1) for gamma={params.gamma:.6g}",
        )
        if nu_ok:
            beta_min = beta_lower_bound(
                params.nu, params.gamma, params.eta, params.theta, factor=4.0
            )
            beta_min_lenient = beta_lower_bound(
                params.nu, params.gamma, params.eta, params.theta, factor=2.0
            )
            soft(
                "beta",
                params.beta > beta_min,
                f"beta must exceed {beta_min:.6g} for guaranteed expected decrease",
            )

    return ValidationReport(
        checks=tuple(checks),
        nu_min=nu_min,
        beta_min=beta_min,
        beta_min_lenient=beta_min_lenient,
    )


def refresh_step_state(tentative: np.ndarray, eta: float) -> StepState:
    """Derive the working stepsizes and the Delta/delta extremes.

    Raises NonPositiveStep if any tentative entry is <= 0.
    """
    tentative = np.asarray(tentative, dtype=float)
    if tentative.ndim != 1 or tentative.size == 0:
        raise NonPositiveStep("tentative stepsizes must be a nonempty 1-D vector")
    if not np.all(tentative > 0.0):
        raise NonPositiveStep("all tentative stepsizes must be > 0")
    if not 0.0 < eta <= 1.0:
        raise InvalidParam("eta", "eta must lie in (0, 1]")
    Delta = float(np.max(tentative))
    working = np.maximum(tentative, eta * Delta)
    delta = float(np.min(working))
    return StepState(
        tentative=tentative.copy(), working=working, Delta=Delta, delta=delta
    )
