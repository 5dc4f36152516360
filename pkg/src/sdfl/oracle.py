"""Noisy zeroth-order oracle layer: mean estimates with an adaptive sample count.

An estimate of the objective at x averages p independent realizations, where p
is chosen from the declared variance bound so that the estimate lands within
c*eps_f*delta**2 of the truth with probability at least beta (Chebyshev bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Protocol, runtime_checkable

import numpy as np


class NonPositiveDelta(ValueError):
    """The precision parameter delta must be positive."""


class OracleFailure(RuntimeError):
    """The underlying stochastic function failed to produce a value."""


class TruthUnavailable(RuntimeError):
    """The operation needs ground truth the problem does not expose."""


@runtime_checkable
class StochasticFunction(Protocol):
    """One independent noisy realization of the objective at x.

    Implementations may additionally provide
    ``sample_batch(x, size, rng) -> np.ndarray`` drawing ``size`` i.i.d.
    realizations at once; the estimator uses it when present.
    """

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> float: ...


class SampleSize(NamedTuple):
    count: int
    clamped: bool


@dataclass(frozen=True)
class EstimateReport:
    """A mean estimate: the value, how many samples built it, and where."""

    value: float
    samples: int
    clamped: bool
    x: np.ndarray


@dataclass(frozen=True)
class VariancePilot:
    """Sample variance of a pilot batch, used when no variance bound is given."""

    estimate: float
    pilot_size: int
    x0: np.ndarray


def required_samples(
    V: float,
    c: float,
    eps_f: float,
    beta: float,
    delta: float,
    p_max: Optional[int] = None,
) -> SampleSize:
    """Sample count making the mean estimate beta-probably accurate at scale delta.

    Returns max(1, ceil(V / (c^2 eps_f^2 (1-beta) delta^4))), clamped to p_max
    when given; the flag records whether the clamp was active.
    """
    if delta <= 0.0:
        raise NonPositiveDelta(f"delta must be > 0, got {delta}")
    if V < 0.0:
        raise ValueError(f"variance bound must be >= 0, got {V}")
    if not (c > 0.0 and eps_f > 0.0 and 0.0 < beta < 1.0):
        raise ValueError("need c > 0, eps_f > 0 and beta in (0, 1)")
    if V == 0.0:
        return SampleSize(1, False)
    # delta**4 can underflow to 0 for tiny steps: an unbounded requirement
    denom = c**2 * eps_f**2 * (1.0 - beta) * delta**4
    raw = V / denom if denom > 0.0 else math.inf
    if p_max is not None and raw > p_max:
        return SampleSize(p_max, True)
    if not math.isfinite(raw):
        raise OverflowError(
            "required sample count overflows; supply p_max to clamp it"
        )
    return SampleSize(max(1, math.ceil(raw)), False)


def estimate(
    fn: StochasticFunction,
    x: np.ndarray,
    p: int,
    stream: np.random.Generator,
    clamped: bool = False,
) -> EstimateReport:
    """Average p fresh realizations of fn at x drawn from the given stream."""
    if p < 1:
        raise ValueError(f"sample count must be >= 1, got {p}")
    x = np.asarray(x, dtype=float)
    batch = getattr(fn, "sample_batch", None)
    if batch is not None:
        values = np.asarray(batch(x, p, stream), dtype=float)
        value = float(values.mean())
    else:
        value = float(np.mean([fn.sample(x, stream) for _ in range(p)]))
    return EstimateReport(value=value, samples=p, clamped=clamped, x=x.copy())


def is_accurate(
    F_val: float, f_true: float, c: float, eps_f: float, delta: float
) -> bool:
    """Whether the estimate sits within c*eps_f*delta**2 of the truth."""
    return abs(F_val - f_true) <= c * eps_f * delta**2


def pilot_variance(
    fn: StochasticFunction,
    x0: np.ndarray,
    pilot_size: int,
    stream: np.random.Generator,
) -> VariancePilot:
    """Unbiased sample variance of pilot_size realizations at x0."""
    if pilot_size < 2:
        raise ValueError(f"pilot_size must be >= 2, got {pilot_size}")
    x0 = np.asarray(x0, dtype=float)
    batch = getattr(fn, "sample_batch", None)
    if batch is not None:
        values = np.asarray(batch(x0, pilot_size, stream), dtype=float)
    else:
        values = np.array([fn.sample(x0, stream) for _ in range(pilot_size)])
    return VariancePilot(
        estimate=float(np.var(values, ddof=1)), pilot_size=pilot_size, x0=x0.copy()
    )


def empirical_accuracy_rate(
    problem,
    x: np.ndarray,
    c: float,
    eps_f: float,
    delta: float,
    p: int,
    trials: int,
    stream: np.random.Generator,
) -> float:
    """Fraction of independent p-sample estimates accurate at scale delta.

    Audits the accuracy-probability target against a problem with known truth.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if delta <= 0.0:
        raise NonPositiveDelta(f"delta must be > 0, got {delta}")
    f_true = getattr(problem, "f_true", None)
    if f_true is None:
        raise TruthUnavailable("problem exposes no true objective")
    truth = float(f_true(np.asarray(x, dtype=float)))
    hits = 0
    for _ in range(trials):
        rep = estimate(problem, x, p, stream)
        hits += is_accurate(rep.value, truth, c, eps_f, delta)
    return hits / trials


class OracleSession:
    """Per-run estimate bookkeeping: derived streams, eval counter, sample rule.

    Every estimate draws from a stream derived from (root seed, iteration,
    evaluation counter), so a run is bit-reproducible from its seed and calls
    at the same point stay independent.
    """

    def __init__(self, fn: StochasticFunction, root_seed: int, p_max: int):
        if root_seed < 0:
            raise ValueError("root seed must be >= 0")
        self.fn = fn
        self.root_seed = int(root_seed)
        self.p_max = int(p_max)
        self.nF = 0
        self.k = 0
        self.p = 1
        self.p_clamped = False
        self.clamp_events = 0

    def begin_iteration(
        self, k: int, V: float, c: float, eps_f: float, beta: float, delta: float
    ) -> SampleSize:
        """Fix the sample count for iteration k from its minimum working stepsize."""
        self.k = int(k)
        size = required_samples(V, c, eps_f, beta, delta, p_max=self.p_max)
        self.p = size.count
        self.p_clamped = size.clamped
        self.clamp_events += int(size.clamped)
        return size

    def evaluate(self, x: np.ndarray) -> float:
        """One fresh estimate at x; increments the evaluation counter."""
        stream = np.random.default_rng([self.root_seed, self.k, self.nF])
        report = estimate(self.fn, x, self.p, stream, clamped=self.p_clamped)
        self.nF += 1
        return report.value
