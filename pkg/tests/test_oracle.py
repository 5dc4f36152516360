import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdfl.oracle import (
    NonPositiveDelta,
    OracleSession,
    TruthUnavailable,
    empirical_accuracy_rate,
    estimate,
    is_accurate,
    pilot_variance,
    required_samples,
)
from sdfl.problems import NoiseModel, NoisyProblem, make_problem


def noisy_sphere(dim=1, kind="gaussian", param=1.0):
    return make_problem("sphere", dim=dim, noise=NoiseModel(kind, param))


class TestRequiredSamples:
    def test_hand_value(self):
        assert required_samples(4.0, 1.0, 0.5, 0.5, 1.0).count == 32

    def test_zero_variance_needs_one(self):
        assert required_samples(0.0, 1.0, 1.0, 0.5, 1.0) == (1, False)

    def test_fractional_rounds_up_to_one(self):
        assert required_samples(1.0, 1.0, 1.0, 0.9, 2.0).count == 1

    def test_clamp(self):
        size = required_samples(1.0, 1.0, 1.0, 0.8, 0.01, p_max=1000)
        assert size == (1000, True)
        size = required_samples(1.0, 1.0, 1.0, 0.8, 10.0, p_max=1000)
        assert not size.clamped

    def test_nonpositive_delta(self):
        with pytest.raises(NonPositiveDelta):
            required_samples(1.0, 1.0, 1.0, 0.5, 0.0)

    @given(
        delta_lo=st.floats(min_value=1e-2, max_value=1.0),
        factor=st.floats(min_value=1.0, max_value=10.0),
        V=st.floats(min_value=0.0, max_value=100.0),
    )
    @settings(max_examples=100)
    def test_monotone_in_delta(self, delta_lo, factor, V):
        lo = required_samples(V, 1.0, 0.1, 0.8, delta_lo).count
        hi = required_samples(V, 1.0, 0.1, 0.8, delta_lo * factor).count
        assert hi <= lo


class TestEstimate:
    def test_deterministic_oracle(self):
        prob = make_problem("sphere", dim=1)
        rep = estimate(prob, np.array([3.0]), 5, np.random.default_rng(0))
        assert rep.value == 9.0
        assert rep.samples == 5
        assert not rep.clamped

    def test_law_of_large_numbers(self):
        # constant 7 plus zero-mean noise: large p converges to 7
        prob = NoisyProblem(
            name="const7", dim=1,
            f_true=lambda x: 7.0, grad_true=lambda x: np.zeros(1),
            f_low=7.0, noise=NoiseModel("gaussian", 4.0), V=4.0,
            x0=np.zeros(1),
        )
        p = 4000
        hits = 0
        trials = 200
        for t in range(trials):
            rep = estimate(prob, np.zeros(1), p, np.random.default_rng(t))
            hits += abs(rep.value - 7.0) <= 3.0 * math.sqrt(4.0 / p)
        assert hits / trials >= 0.99

    def test_p_zero_rejected(self):
        prob = make_problem("sphere", dim=1)
        with pytest.raises(ValueError):
            estimate(prob, np.zeros(1), 0, np.random.default_rng(0))

    def test_scalar_fallback_path(self):
        class ScalarOnly:
            def sample(self, x, rng):
                return float(x[0]) + rng.normal()

        rep = estimate(ScalarOnly(), np.array([2.0]), 50, np.random.default_rng(7))
        assert rep.samples == 50
        assert abs(rep.value - 2.0) < 1.0

    @pytest.mark.parametrize("p", [1, 10, 100])
    def test_variance_shrinks_like_v_over_p(self, p):
        # empirical variance of the estimator <= V/p within 3 standard errors
        V = 2.0
        prob = noisy_sphere(param=V)
        reps = 2000
        x = np.array([0.5])
        vals = np.array(
            [
                estimate(prob, x, p, np.random.default_rng([123, p, r])).value
                for r in range(reps)
            ]
        )
        emp_var = vals.var(ddof=1)
        se = (V / p) * math.sqrt(2.0 / (reps - 1))
        assert emp_var <= V / p + 3.0 * se


class TestIsAccurate:
    def test_hand_values(self):
        assert is_accurate(1.05, 1.0, 1.0, 0.1, 1.0)
        assert not is_accurate(1.05, 1.0, 1.0, 0.1, 0.5)

    @given(
        f=st.floats(min_value=-1e6, max_value=1e6),
        c=st.floats(min_value=1e-3, max_value=1e3),
    )
    @settings(max_examples=50)
    def test_exact_estimate_always_accurate(self, f, c):
        assert is_accurate(f, f, c, 0.1, 0.5)


class TestPilotVariance:
    def test_zero_noise(self):
        prob = make_problem("sphere", dim=2)
        pilot = pilot_variance(prob, prob.x0, 30, np.random.default_rng(0))
        assert pilot.estimate == 0.0
        assert pilot.pilot_size == 30

    def test_uniform_noise_matches_analytic(self):
        # half-width 1 uniform noise has variance 1/3
        prob = noisy_sphere(kind="uniform", param=1.0)
        pilot = pilot_variance(prob, prob.x0, 100_000, np.random.default_rng(1))
        assert pilot.estimate == pytest.approx(1.0 / 3.0, rel=0.05)

    def test_pilot_size_one_rejected(self):
        prob = make_problem("sphere", dim=1)
        with pytest.raises(ValueError):
            pilot_variance(prob, prob.x0, 1, np.random.default_rng(0))


class TestEmpiricalAccuracyRate:
    def test_zero_noise_rate_one(self):
        prob = make_problem("sphere", dim=2)
        rate = empirical_accuracy_rate(
            prob, prob.x0, 1.0, 0.1, 0.5, p=1, trials=50,
            stream=np.random.default_rng(0),
        )
        assert rate == 1.0

    @pytest.mark.parametrize(
        "V,beta,delta",
        [(1.0, 0.8, 1.0), (1.0, 0.8, 0.5), (4.0, 0.5, 0.7), (0.25, 0.9, 1.5)],
    )
    def test_chebyshev_rule_achieves_beta(self, V, beta, delta):
        c, eps_f = 1.0, 1.0
        prob = noisy_sphere(param=V)
        p = required_samples(V, c, eps_f, beta, delta).count
        rate = empirical_accuracy_rate(
            prob, prob.x0, c, eps_f, delta, p, trials=2000,
            stream=np.random.default_rng(42),
        )
        assert rate >= beta - 2.0 * math.sqrt(beta * (1 - beta) / 2000)

    def test_p1_huge_noise_matches_gaussian_tail(self):
        # single-sample estimates: the accuracy rate is the two-sided normal
        # mass inside +-c*eps_f*delta^2
        V, c, eps_f, delta = 4.0, 1.0, 1.0, 1.0
        prob = noisy_sphere(param=V)
        threshold = c * eps_f * delta**2
        expected = math.erf(threshold / math.sqrt(2.0 * V))
        rate = empirical_accuracy_rate(
            prob, prob.x0, c, eps_f, delta, p=1, trials=20_000,
            stream=np.random.default_rng(3),
        )
        assert rate == pytest.approx(expected, abs=0.02)

    def test_truth_required(self):
        class NoTruth:
            def sample(self, x, rng):
                return 0.0

        with pytest.raises(TruthUnavailable):
            empirical_accuracy_rate(
                NoTruth(), np.zeros(1), 1.0, 0.1, 1.0, 1, 10,
                np.random.default_rng(0),
            )


class TestOracleSession:
    def test_streams_reproducible_and_independent(self):
        prob = noisy_sphere(param=1.0)
        a = OracleSession(prob, root_seed=11, p_max=100)
        b = OracleSession(prob, root_seed=11, p_max=100)
        x = np.array([1.0])
        va = [a.evaluate(x) for _ in range(5)]
        vb = [b.evaluate(x) for _ in range(5)]
        assert va == vb                     # bit-reproducible
        assert len(set(va)) == 5            # fresh stream per call
        assert a.nF == 5

    def test_iteration_scoped_sampling_rule(self):
        prob = noisy_sphere(param=1.0)
        session = OracleSession(prob, root_seed=0, p_max=200)
        size = session.begin_iteration(0, V=1.0, c=1.0, eps_f=1.0, beta=0.8, delta=0.5)
        assert size.count == required_samples(1.0, 1.0, 1.0, 0.8, 0.5).count
        assert not size.clamped
        size = session.begin_iteration(1, V=1.0, c=1.0, eps_f=1.0, beta=0.8, delta=0.1)
        assert size == (200, True)
        assert session.clamp_events == 1
