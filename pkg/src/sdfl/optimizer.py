"""Derivative-free linesearch optimizer over noisy estimates.

Each iteration sweeps the coordinate directions in order. A direction is
probed forward, then backward if the forward probe fails; an accepted probe is
extrapolated by repeatedly doubling the step while consecutive trial points
keep beating the sufficient-decrease threshold. Stepsizes contract by theta
after a sweep with no accepted step and otherwise carry the accepted lengths
forward.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    AlgoParams,
    DirectionOutcome,
    IterationTrace,
    NonPositiveStep,
    TruthInfo,
    refresh_step_state,
    validate_params,
)
from .diagnostics import improvement_function
from .oracle import OracleSession, pilot_variance

_PILOT_STREAM_TAG = 0x9E3779B9


class ExpansionSafeguard(RuntimeError):
    """The expansion loop hit the doubling cap before its test failed.

    Carries the last accepted step so callers can continue with it.
    """

    def __init__(self, alpha: float, doublings: int, i: Optional[int] = None):
        super().__init__(
            f"expansion hit the doubling cap after {doublings} rounds"
            + (f" on coordinate {i}" if i is not None else "")
        )
        self.alpha = alpha
        self.doublings = doublings
        self.i = i


class StopReason(enum.Enum):
    MAX_ITERS = "max_iters"
    MAX_EVALS = "max_evals"
    DELTA_TOL = "delta_tol"


@dataclass(frozen=True)
class RunResult:
    final_x: np.ndarray
    iterations: int
    nF_total: int
    stop_reason: StopReason
    trace: tuple[IterationTrace, ...]

    @property
    def safeguard_hits(self) -> int:
        return sum(
            d.safeguard_hit for t in self.trace for d in t.per_direction
        )

    @property
    def clamped_iterations(self) -> int:
        return sum(t.p_clamped for t in self.trace)


def sufficient_decrease(
    F_new: float, F_ref: float, step: float, gamma: float, c: float, eps_f: float
) -> bool:
    """True when F_new improves on F_ref by at least gamma*c*eps_f*step**2."""
    return F_new - F_ref <= -gamma * c * eps_f * step**2


def expansion_linesearch(
    y: np.ndarray,
    p: np.ndarray,
    bar_alpha: float,
    f_at_alpha: float,
    session: OracleSession,
    params: AlgoParams,
) -> tuple[float, int]:
    """Extrapolate an accepted step along p by doubling.

    f_at_alpha is the already-computed estimate at y + bar_alpha*p. Each round
    compares a fresh estimate at the doubled step against the estimate at the
    current one and accepts while the gap beats the threshold for the step
    difference. Returns (accepted step, number of doublings); raises
    ExpansionSafeguard when the cap stops the loop first.
    """
    alpha = bar_alpha
    f_alpha = f_at_alpha
    beta = 2.0 * alpha
    doublings = 0
    f_beta = session.evaluate(y + beta * p)
    while sufficient_decrease(
        f_beta, f_alpha, beta - alpha, params.gamma, params.c, params.eps_f
    ):
        alpha = beta
        f_alpha = f_beta
        doublings += 1
        beta = 2.0 * alpha
        if doublings >= params.max_doublings:
            raise ExpansionSafeguard(alpha=alpha, doublings=doublings)
        f_beta = session.evaluate(y + beta * p)
    return alpha, doublings


def explore_direction(
    y: np.ndarray,
    i: int,
    bar_alpha: float,
    session: OracleSession,
    params: AlgoParams,
) -> tuple[DirectionOutcome, np.ndarray]:
    """Probe coordinate i from y, falling back to the opposite sign.

    Estimates at y and y + bar_alpha*e_i are always computed; when the forward
    probe misses the threshold the backward one is tried. An accepted probe is
    extrapolated and the returned point moves by the accepted step; a safeguard
    stop is recorded on the outcome, never raised.
    """
    if bar_alpha <= 0.0:
        raise NonPositiveStep("bar_alpha must be > 0")
    e = np.zeros_like(y)
    e[i] = 1.0

    f_y = session.evaluate(y)
    f_plus = session.evaluate(y + bar_alpha * e)
    opposite_tried = False
    if sufficient_decrease(f_plus, f_y, bar_alpha, params.gamma, params.c, params.eps_f):
        sign, f_start = 1, f_plus
    else:
        opposite_tried = True
        f_minus = session.evaluate(y - bar_alpha * e)
        if sufficient_decrease(
            f_minus, f_y, bar_alpha, params.gamma, params.c, params.eps_f
        ):
            sign, f_start = -1, f_minus
        else:
            outcome = DirectionOutcome(
                i=i,
                p_sign=None,
                alpha=0.0,
                bar_alpha=bar_alpha,
                doublings=0,
                opposite_tried=True,
                safeguard_hit=False,
            )
            return outcome, y

    p = sign * e
    safeguard_hit = False
    try:
        alpha, doublings = expansion_linesearch(
            y, p, bar_alpha, f_start, session, params
        )
    except ExpansionSafeguard as stop:
        alpha, doublings = stop.alpha, stop.doublings
        safeguard_hit = True
    outcome = DirectionOutcome(
        i=i,
        p_sign=sign,
        alpha=alpha,
        bar_alpha=bar_alpha,
        doublings=doublings,
        opposite_tried=opposite_tried,
        safeguard_hit=safeguard_hit,
    )
    return outcome, y + alpha * p


def update_stepsizes(
    successful: bool, alphas: np.ndarray, bar_alphas: np.ndarray, theta: float
) -> np.ndarray:
    """Tentative stepsizes for the next iteration.

    A sweep with no accepted step contracts every working stepsize by theta;
    otherwise each coordinate keeps the longer of its accepted and working
    lengths.
    """
    alphas = np.asarray(alphas, dtype=float)
    bar_alphas = np.asarray(bar_alphas, dtype=float)
    if np.any(bar_alphas <= 0.0):
        raise NonPositiveStep("working stepsizes must be > 0")
    if np.any(alphas < 0.0):
        raise ValueError("accepted steps must be >= 0")
    if successful:
        return np.maximum(alphas, bar_alphas)
    return theta * bar_alphas


def _truth_info(problem, x: np.ndarray, Delta: float, params: AlgoParams):
    f_true = getattr(problem, "f_true", None)
    grad_true = getattr(problem, "grad_true", None)
    if f_true is None or grad_true is None:
        return None
    f_val = float(f_true(x))
    grad_norm = float(np.linalg.norm(grad_true(x)))
    f_low = getattr(problem, "f_low", None)
    phi = None
    if params.nu is not None and 0.0 < params.nu < 1.0 and f_low is not None:
        phi = improvement_function(
            f_val, f_low, Delta, params.nu, params.c, params.eps_f
        )
    return TruthInfo(f_true=f_val, grad_norm=grad_norm, phi=phi)


def run(
    problem,
    params: AlgoParams,
    seed: int,
    x0: Optional[np.ndarray] = None,
    alpha0: Optional[np.ndarray] = None,
) -> RunResult:
    """Optimize `problem` from its start point until a stopping rule fires.

    The problem must provide sample(x, rng); truth fields (f_true, grad_true,
    f_low) are picked up when present and recorded on the trace. Its declared
    variance bound V drives the per-iteration sample count; when absent, a
    30-sample pilot at the start point supplies one, inflated by 1.5 (those
    pilot draws are setup work and are not counted against max_evals).

    alpha0 gives the initial tentative stepsizes (default: all ones).
    """
    x = np.array(problem.x0 if x0 is None else x0, dtype=float)
    n = x.size
    validate_params(params, n)

    if alpha0 is None:
        tentative = np.ones(n)
    else:
        tentative = np.asarray(alpha0, dtype=float).copy()
        if tentative.shape != (n,):
            raise NonPositiveStep(f"alpha0 must have shape ({n},)")
        if np.any(tentative <= 0.0):
            raise NonPositiveStep("all initial stepsizes must be > 0")

    session = OracleSession(problem, seed, p_max=params.p_max)
    V = getattr(problem, "V", None)
    if V is None:
        pilot_stream = np.random.default_rng([int(seed), _PILOT_STREAM_TAG])
        V = 1.5 * pilot_variance(problem, x, 30, pilot_stream).estimate

    trace: list[IterationTrace] = []
    k = 0
    while True:
        state = refresh_step_state(tentative, params.eta)
        if k >= params.max_iters:
            reason = StopReason.MAX_ITERS
            break
        if session.nF >= params.max_evals:
            reason = StopReason.MAX_EVALS
            break
        if state.Delta <= params.delta_tol:
            reason = StopReason.DELTA_TOL
            break

        size = session.begin_iteration(
            k, V, params.c, params.eps_f, params.beta, state.delta
        )
        y = x.copy()
        outcomes: list[DirectionOutcome] = []
        for i in range(n):
            outcome, y = explore_direction(
                y, i, float(state.working[i]), session, params
            )
            outcomes.append(outcome)

        successful = any(o.alpha > 0.0 for o in outcomes)
        alphas = np.array([o.alpha for o in outcomes])
        trace.append(
            IterationTrace(
                k=k,
                x=x.copy(),
                Delta=state.Delta,
                delta=state.delta,
                successful=successful,
                per_direction=tuple(outcomes),
                nF_cumulative=session.nF,
                samples_per_estimate=size.count,
                p_clamped=size.clamped,
                truth=_truth_info(problem, x, state.Delta, params),
            )
        )
        tentative = update_stepsizes(successful, alphas, state.working, params.theta)
        x = y
        k += 1

    return RunResult(
        final_x=x,
        iterations=k,
        nF_total=session.nF,
        stop_reason=reason,
        trace=tuple(trace),
    )


def recount_evals(trace) -> int:
    """Recompute the total estimate count from per-direction outcomes alone."""
    return sum(t.evals_used() for t in trace)
