import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdfl.core import AlgoParams, NonPositiveStep
from sdfl.optimizer import (
    ExpansionSafeguard,
    StopReason,
    expansion_linesearch,
    explore_direction,
    recount_evals,
    run,
    sufficient_decrease,
    update_stepsizes,
)
from sdfl.oracle import OracleFailure, OracleSession
from sdfl.problems import NoiseModel, NoisyProblem, make_problem

PARAMS_003 = AlgoParams(gamma=3.0, c=1.0, eps_f=0.01)  # threshold coeff 0.03


def scalar_problem(f):
    """Noiseless 1-D problem wrapping a scalar function of one variable."""
    return NoisyProblem(
        name="scalar",
        dim=1,
        f_true=lambda x: float(f(x[0])),
        grad_true=lambda x: np.zeros(1),
        f_low=0.0,
        noise=NoiseModel("none"),
        V=0.0,
        x0=np.zeros(1),
    )


def session_for(f, p_max=10**6):
    return OracleSession(scalar_problem(f), root_seed=0, p_max=p_max)


class TestSufficientDecrease:
    def test_hand_values(self):
        # threshold -gamma*c*eps_f*step^2 = -0.1: a drop of 0.2 passes
        assert sufficient_decrease(-0.2, 0.0, 0.5, 4.0, 1.0, 0.1)
        # threshold -0.03: a drop of only 0.02 fails
        assert not sufficient_decrease(-0.02, 0.0, 1.0, 3.0, 1.0, 0.01)

    def test_zero_step_boundary(self):
        assert sufficient_decrease(1.0, 1.0, 0.0, 3.0, 1.0, 0.01)


class TestExpansionLinesearch:
    def test_doubling_stops_past_minimizer(self):
        f = lambda t: (t - 8.0) ** 2
        session = session_for(f)
        alpha, m = expansion_linesearch(
            np.zeros(1), np.ones(1), 1.0, f(1.0), session, PARAMS_003
        )
        assert (alpha, m) == (8.0, 3)
        assert session.nF == 4  # estimates at 2, 4, 8, 16

    def test_linear_function_hits_safeguard(self):
        params = AlgoParams(gamma=3.0, c=1.0, eps_f=0.01, max_doublings=5)
        session = session_for(lambda t: -t)
        with pytest.raises(ExpansionSafeguard) as err:
            expansion_linesearch(
                np.zeros(1), np.ones(1), 1.0, -1.0, session, params
            )
        assert err.value.doublings == 5
        assert err.value.alpha == 32.0
        assert session.nF == 5  # the trial after the capped accept is skipped

    def test_immediate_stop_returns_initial_step(self):
        f = lambda t: (t - 1.5) ** 2
        session = session_for(f)
        alpha, m = expansion_linesearch(
            np.zeros(1), np.ones(1), 1.0, f(1.0), session, PARAMS_003
        )
        assert (alpha, m) == (1.0, 0)
        assert session.nF == 1


class TestExploreDirection:
    def test_forward_success_with_expansion(self):
        session = session_for(lambda t: (t - 8.0) ** 2)
        outcome, y = explore_direction(np.zeros(1), 0, 1.0, session, PARAMS_003)
        assert outcome.p_sign == 1
        assert outcome.alpha == 8.0
        assert outcome.doublings == 3
        assert not outcome.opposite_tried
        assert not outcome.safeguard_hit
        assert y[0] == 8.0
        assert session.nF == 6  # 2 probes + 4 linesearch estimates

    def test_both_probes_fail(self):
        session = session_for(lambda t: t**2)
        outcome, y = explore_direction(np.zeros(1), 0, 1.0, session, PARAMS_003)
        assert outcome.p_sign is None
        assert outcome.alpha == 0.0
        assert outcome.opposite_tried
        assert y[0] == 0.0
        assert session.nF == 3

    def test_opposite_direction_mirror(self):
        session = session_for(lambda t: (t + 8.0) ** 2)
        outcome, y = explore_direction(np.zeros(1), 0, 1.0, session, PARAMS_003)
        assert outcome.p_sign == -1
        assert outcome.alpha == 8.0
        assert outcome.opposite_tried
        assert y[0] == -8.0
        assert session.nF == 7  # 2 probes + opposite + 4 linesearch estimates

    def test_safeguard_is_logged_not_raised(self):
        params = AlgoParams(gamma=3.0, c=1.0, eps_f=0.01, max_doublings=4)
        session = session_for(lambda t: -t)
        outcome, y = explore_direction(np.zeros(1), 0, 1.0, session, params)
        assert outcome.safeguard_hit
        assert outcome.doublings == 4
        assert outcome.alpha == 16.0
        assert y[0] == 16.0
        assert outcome.evals_used() == session.nF

    def test_nonpositive_bar_alpha(self):
        session = session_for(lambda t: t**2)
        with pytest.raises(NonPositiveStep):
            explore_direction(np.zeros(1), 0, 0.0, session, PARAMS_003)


class TestUpdateStepsizes:
    def test_unsuccessful_contracts_working_steps(self):
        out = update_stepsizes(False, np.zeros(2), np.array([1.0, 2.0]), 0.5)
        np.testing.assert_array_equal(out, [0.5, 1.0])

    def test_successful_keeps_longer_lengths(self):
        out = update_stepsizes(True, np.array([0.0, 4.0]), np.array([1.0, 2.0]), 0.5)
        np.testing.assert_array_equal(out, [1.0, 4.0])

    def test_fixed_point(self):
        out = update_stepsizes(True, np.ones(2), np.ones(2), 0.5)
        np.testing.assert_array_equal(out, [1.0, 1.0])

    @given(
        alphas=st.lists(st.floats(min_value=0.0, max_value=1e6), min_size=1, max_size=6),
        bars=st.lists(st.floats(min_value=1e-9, max_value=1e6), min_size=1, max_size=6),
        theta=st.floats(min_value=0.01, max_value=0.99),
    )
    @settings(max_examples=100)
    def test_bounds(self, alphas, bars, theta):
        size = min(len(alphas), len(bars))
        alphas, bars = np.array(alphas[:size]), np.array(bars[:size])
        succ = update_stepsizes(True, alphas, bars, theta)
        assert np.all(succ >= bars)
        fail = update_stepsizes(False, alphas, bars, theta)
        np.testing.assert_array_equal(fail, theta * bars)


class TestRun:
    def golden_params(self, **kw):
        kw.setdefault("max_iters", 100)
        return AlgoParams(theta=0.5, gamma=3.0, c=1.0, eps_f=0.01, eta=1.0, **kw)

    def test_noiseless_sphere_golden_trace(self):
        # Hand-simulated: iteration 0 moves (1,1)->(0,0) along -e1,-e2 with
        # unit steps (8 estimates); every later sweep fails both probes on
        # both coordinates (6 estimates); stepsizes halve after each failed
        # sweep from iteration 1 on, so Delta_k = 0.5**(k-1) and the run stops
        # at k=21 when Delta <= 1e-6.
        prob = make_problem("sphere", dim=2)
        res = run(prob, self.golden_params(), seed=0,
                  x0=np.array([1.0, 1.0]), alpha0=np.ones(2))
        assert res.stop_reason is StopReason.DELTA_TOL
        assert res.iterations == 21
        assert res.nF_total == 128
        np.testing.assert_array_equal(res.final_x, [0.0, 0.0])

        t0 = res.trace[0]
        assert t0.successful
        assert [d.p_sign for d in t0.per_direction] == [-1, -1]
        assert [d.alpha for d in t0.per_direction] == [1.0, 1.0]
        assert [d.opposite_tried for d in t0.per_direction] == [True, True]
        assert t0.nF_cumulative == 8

        for t in res.trace[1:]:
            assert not t.successful
            assert t.Delta == 0.5 ** (t.k - 1)
            assert t.nF_cumulative == 8 + 6 * t.k
        assert res.trace[-1].truth.grad_norm == 0.0

    def test_zero_iteration_budget(self):
        prob = make_problem("sphere", dim=2)
        res = run(prob, self.golden_params(max_iters=0), seed=0)
        assert res.stop_reason is StopReason.MAX_ITERS
        assert res.iterations == 0
        assert res.trace == ()
        np.testing.assert_array_equal(res.final_x, prob.x0)

    def test_eval_budget(self):
        prob = make_problem("sphere", dim=2)
        res = run(prob, self.golden_params(max_evals=20), seed=0)
        assert res.stop_reason is StopReason.MAX_EVALS
        assert res.nF_total >= 20
        assert res.nF_total == res.trace[-1].nF_cumulative

    def test_same_seed_same_trace(self):
        prob = make_problem("sphere", dim=2, noise=NoiseModel("gaussian", 0.01))
        params = AlgoParams(max_iters=40, p_max=200)
        a = run(prob, params, seed=7)
        b = run(prob, params, seed=7)
        assert a.nF_total == b.nF_total
        assert a.iterations == b.iterations
        for ta, tb in zip(a.trace, b.trace):
            np.testing.assert_array_equal(ta.x, tb.x)
            assert ta.Delta == tb.Delta
            assert ta.per_direction == tb.per_direction

    def test_noiseless_monotone_with_sufficient_decrease_chain(self):
        prob = make_problem("sphere", dim=3)
        params = self.golden_params(max_iters=200)
        res = run(prob, params, seed=0, x0=np.array([1.3, -0.7, 2.1]))
        coeff = params.gamma * params.c * params.eps_f * params.eta**2
        xs = [t.x for t in res.trace] + [res.final_x]
        for t, x_next in zip(res.trace, xs[1:]):
            f_k = prob.f_true(t.x)
            f_next = prob.f_true(x_next)
            assert f_next <= f_k + 1e-15
            if t.successful:
                assert f_next <= f_k - coeff * t.Delta**2 + 1e-15

    def test_step_lattice_and_delta_updates_noisy(self):
        prob = make_problem("sphere", dim=2, noise=NoiseModel("gaussian", 1e-4))
        params = AlgoParams(max_iters=60, p_max=500, delta_tol=0.0)
        res = run(prob, params, seed=3)
        assert res.iterations == 60
        for t in res.trace:
            for d in t.per_direction:
                if d.alpha > 0:
                    assert d.alpha == 2.0**d.doublings * d.bar_alpha
                else:
                    assert d.p_sign is None
        for prev, nxt in zip(res.trace, res.trace[1:]):
            assert nxt.Delta >= params.theta * prev.Delta * (1 - 1e-12)
            if not prev.successful:
                assert nxt.Delta == pytest.approx(
                    params.theta * prev.Delta, rel=1e-12
                )
            else:
                assert nxt.Delta >= prev.Delta * (1 - 1e-12)

    def test_nf_recount_matches(self):
        prob = make_problem("quadratic", dim=3, kappa=8.0,
                            noise=NoiseModel("uniform", 0.01))
        params = AlgoParams(max_iters=50, p_max=300)
        res = run(prob, params, seed=5)
        assert recount_evals(res.trace) == res.nF_total
        running = 0
        for t in res.trace:
            running += t.evals_used()
            assert t.nF_cumulative == running

    def test_oracle_failure_aborts(self):
        class Flaky:
            dim = 1
            x0 = np.zeros(1)
            V = 0.0

            def __init__(self):
                self.calls = 0

            def sample(self, x, rng):
                self.calls += 1
                if self.calls > 5:
                    raise OracleFailure("boom")
                return 0.0

        with pytest.raises(OracleFailure):
            run(Flaky(), AlgoParams(max_iters=10), seed=0)

    def test_pilot_variance_fallback_when_v_missing(self):
        class NoV:
            dim = 1
            x0 = np.zeros(1)

            def sample(self, x, rng):
                return float(rng.normal(0.0, 1.0))

            def sample_batch(self, x, size, rng):
                return rng.normal(0.0, 1.0, size)

        res = run(NoV(), AlgoParams(max_iters=2, p_max=50, delta_tol=0.0), seed=1)
        # pilot-based V > 0 forces more than one sample per estimate
        assert res.trace[0].samples_per_estimate > 1

    def test_bad_alpha0_rejected(self):
        prob = make_problem("sphere", dim=2)
        with pytest.raises(NonPositiveStep):
            run(prob, AlgoParams(), seed=0, alpha0=np.array([1.0, 0.0]))
