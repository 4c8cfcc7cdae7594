"""Learnable sets, divergence gaps, rate constant, sample complexity and decay fits."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from agora.beliefs import BoundedLikelihood
from agora.errors import AssumptionError, ConfigError, NumericError
from agora.graph import spectral_summary
from agora.models import FiniteAgent, coin_table
from agora.rates import (
    LOG_FLOOR,
    divergence_gap,
    divergence_matrix,
    empirical_decay_rate,
    expected_kl,
    global_learnable_set,
    local_optimal_set,
    rate_constant,
    rate_report,
    sample_complexity,
)
from agora.scenarios import STAR_SWEEP, bernoulli_pair, bernoulli_ring3, star_classification
from agora.simulation import resolve_model, run_many, static_weights

PAIR_BIASES = [[0.5, 0.3], [0.5, 0.5], [0.5, 0.7]]  # input 0 uninformative, input 1 informative


def coin_agent(biases, input_probs, truth=1):
    return FiniteAgent(BoundedLikelihood(coin_table(biases)), input_probs, true_index=truth)


def bernoulli_kl(p, q):
    return p * math.log(p / q) + (1 - p) * math.log((1 - p) / (1 - q))


def report_of(scenario):
    w = static_weights(scenario)
    model = resolve_model(scenario, w.n_agents)
    return rate_report(model.agents, w, scenario.batch_size, labels=model.labels)


class TestLocalOptimalSet:
    def test_realizable_contains_truth(self):
        for probs in ([1.0, 0.0], [0.0, 1.0], [0.3, 0.7]):
            assert 1 in local_optimal_set(coin_agent(PAIR_BIASES, probs))

    def test_blind_agent_keeps_ties(self):
        assert local_optimal_set(coin_agent(PAIR_BIASES, [1.0, 0.0])) == {0, 1, 2}

    def test_informative_agent_pins_truth(self):
        assert local_optimal_set(coin_agent(PAIR_BIASES, [0.5, 0.5])) == {1}

    def test_empty_parameter_set(self):
        with pytest.raises(ConfigError):
            local_optimal_set(coin_agent(PAIR_BIASES, [0.5, 0.5]), n_params=0)


class TestGlobalLearnableSet:
    def test_all_equal(self):
        assert global_learnable_set([{0, 1, 2}] * 3).members == {0, 1, 2}

    def test_disjoint_flagged(self):
        s = global_learnable_set([{0}, {1}])
        assert not s.globally_learnable
        assert s.reason == "not globally learnable"

    def test_coordinate_split_identifies_truth(self):
        # theta on a 3x3 grid; P(y=1 | theta, x) = sigmoid(theta . x) with
        # x in {e1, e2}; agent 1 sees only e1, agent 2 only e2
        grid = list(itertools.product([-1.0, 0.0, 1.0], repeat=2))
        truth = grid.index((1.0, -1.0))
        inputs = np.eye(2)
        biases = [[1 / (1 + math.exp(-np.dot(t, x))) for x in inputs] for t in grid]
        agents = [coin_agent(biases, p, truth) for p in ([1.0, 0.0], [0.0, 1.0])]
        locals_ = [local_optimal_set(a) for a in agents]
        assert all(len(s) == 3 for s in locals_)
        assert global_learnable_set(locals_).members == {truth}


class TestDivergenceGap:
    def test_bernoulli_closed_form(self):
        agent = coin_agent([[0.5], [0.7]], [1.0], truth=0)
        value = divergence_gap(agent, 0, 1).value
        assert value == pytest.approx(0.5 * math.log(0.5 / 0.7) + 0.5 * math.log(0.5 / 0.3), abs=1e-12)
        assert value == pytest.approx(0.0872, abs=1e-4)

    def test_blind_agent(self):
        assert divergence_gap(coin_agent(PAIR_BIASES, [1.0, 0.0]), 1, 0).value == 0.0

    def test_realizable_equals_kl_from_truth(self):
        agent = coin_agent(PAIR_BIASES, [0.4, 0.6])
        assert divergence_gap(agent, 1, 2).value == pytest.approx(0.6 * bernoulli_kl(0.5, 0.7), rel=1e-12)

    def test_batch_scales_linearly(self):
        agent = coin_agent(PAIR_BIASES, [0.4, 0.6])
        assert divergence_gap(agent, 1, 0, batch_size=5).value == pytest.approx(5 * divergence_gap(agent, 1, 0).value)

    def test_contract_on_theta_star(self):
        agent = coin_agent(PAIR_BIASES, [0.5, 0.5])
        with pytest.raises(ConfigError):
            divergence_gap(agent, 0, 1, theta_star_set={1})
        with pytest.raises(ConfigError):
            divergence_gap(agent, 1, 1, theta_star_set={1})

    def test_monte_carlo_agrees_and_is_seeded(self):
        agent = coin_agent(PAIR_BIASES, [0.35, 0.65])
        exact = divergence_gap(agent, 1, 0).value
        est = divergence_gap(agent, 1, 0, mc_samples=100_000, seed=5)
        assert abs(est.value - exact) < 4 * est.stderr
        assert est == divergence_gap(agent, 1, 0, mc_samples=100_000, seed=5)

    def test_monte_carlo_standard_error_scaling(self):
        agent = coin_agent(PAIR_BIASES, [0.35, 0.65])

        def mean_se(n):
            return np.mean([divergence_gap(agent, 1, 0, mc_samples=n, seed=s).stderr for s in range(20)])

        base, doubled, quadrupled = mean_se(20_000), mean_se(40_000), mean_se(80_000)
        # the standard error scales as 1/sqrt(samples)
        assert doubled / base == pytest.approx(1 / math.sqrt(2), rel=0.05)
        assert quadrupled / base == pytest.approx(0.5, rel=0.05)
        # and doubling lands within a factor 3 of halving
        assert 0.5 / 3 <= doubled / base <= 0.5 * 3

    def test_nonnegative_when_realizable(self):
        agents = resolve_model(bernoulli_ring3(), 3).agents
        div = divergence_matrix(agents)
        assert np.all(div[:, 0, :] >= 0)


class TestRateConstant:
    def test_single_agent(self):
        agent = coin_agent(PAIR_BIASES, [0.5, 0.5])
        div = divergence_matrix([agent])
        rc = rate_constant([1.0], div, {1})
        assert rc.k == pytest.approx(min(div[0, 1, 0], div[0, 1, 2]))

    def test_two_specialists(self):
        # agent 0 rules out b only, agent 1 rules out c only
        biases = [[0.5, 0.5], [0.7, 0.5], [0.5, 0.2]]
        agents = [coin_agent(biases, [1.0, 0.0], 0), coin_agent(biases, [0.0, 1.0], 0)]
        rc = rate_constant([0.5, 0.5], divergence_matrix(agents), {0})
        assert rc.k == pytest.approx(0.5 * min(bernoulli_kl(0.5, 0.7), bernoulli_kl(0.5, 0.2)), rel=1e-12)
        assert rc.argmin == (0, 1)

    def test_degenerate_when_everything_learnable(self):
        rc = rate_constant([1.0], np.zeros((1, 2, 2)), {0, 1})
        assert rc.degenerate and math.isinf(rc.k)

    def test_recomputes_from_definition(self):
        rep = report_of(bernoulli_ring3())
        weighted = np.einsum("j,jab->ab", rep.centrality, rep.divergences)
        brute = min(weighted[a, b] for a in rep.theta_star_set for b in range(3) if b not in rep.theta_star_set)
        assert rep.k_theta == pytest.approx(brute, abs=1e-10)
        assert rep.positivity_holds()

    def test_star_sweep_increasing(self):
        ks = [report_of(star_classification(a)).k_theta for a in STAR_SWEEP]
        assert all(b > a for a, b in zip(ks, ks[1:]))
        centers = [report_of(star_classification(a)).centrality[0] for a in STAR_SWEEP]
        assert all(b > a for a, b in zip(centers, centers[1:]))

    @given(st.integers(2, 5), st.integers(3, 5), st.integers(0, 2**32 - 1),
           arrays(np.float64, 5, elements=st.floats(0, 1)))
    def test_monotone_in_added_information(self, n, p, seed, extra):
        rng = np.random.default_rng(seed)
        ekl = np.zeros((n, p))
        ekl[:, 1:] = rng.random((n, p - 1)) * (rng.random((n, p - 1)) < 0.6)
        ekl[0, 1:] += 0.01  # every wrong parameter is ruled out somewhere
        v = rng.random(n) + 0.1
        v /= v.sum()
        div = ekl[:, None, :] - ekl[:, :, None]
        rc = rate_constant(v, div, {0})
        assert rc.k > 0
        j = seed % n
        boosted = ekl.copy()
        boosted[j, 1:] += extra[: p - 1]
        assert rate_constant(v, boosted[:, None, :] - boosted[:, :, None], {0}).k >= rc.k - 1e-15


class TestSampleComplexity:
    def test_spot_value(self):
        sc = sample_complexity(2, 2, 0.1, 0.1, 1.0, 1.0)
        assert sc.rounds == math.ceil(8 * math.log(40) / 0.01) == 2952

    def test_linear_in_C(self):
        a = sample_complexity(3, 3, 0.2, 0.05, 1.0, 0.5)
        b = sample_complexity(3, 3, 0.2, 0.05, 2.0, 0.5)
        exact = 8 * math.log(9 / 0.2) / (0.05**2 * 0.5)
        assert a.rounds == math.ceil(exact) and b.rounds == math.ceil(2 * exact)

    def test_smaller_delta_grows_logarithmically(self):
        a = sample_complexity(3, 3, 0.1, 0.05, 1.0, 0.5).rounds
        b = sample_complexity(3, 3, 0.01, 0.05, 1.0, 0.5).rounds
        assert b > a
        assert b - a == pytest.approx(8 * math.log(10) / (0.05**2 * 0.5), abs=2)

    def test_vacuous_flag(self):
        assert sample_complexity(2, 2, 0.1, 0.2, 1.0, 1.0, k=0.1).vacuous
        assert not sample_complexity(2, 2, 0.1, 0.05, 1.0, 1.0, k=0.1).vacuous

    def test_degenerate_gap(self):
        with pytest.raises(ConfigError):
            sample_complexity(2, 2, 0.1, 0.1, 1.0, 0.0)

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.1])
    def test_delta_range(self, delta):
        with pytest.raises(ConfigError):
            sample_complexity(2, 2, delta, 0.1, 1.0, 1.0)


class TestDecayFit:
    def test_exact_exponential(self):
        n = np.arange(400)
        fit = empirical_decay_rate(-0.2 * n, burn_in=50)
        assert fit.slope == pytest.approx(0.2, abs=1e-9)
        assert not fit.truncated

    def test_constant_trace(self):
        assert empirical_decay_rate(np.full(100, -1.5), 10).slope == pytest.approx(0.0, abs=1e-12)

    def test_floor_before_burn_in_truncates(self):
        n = np.arange(300)
        trace = np.maximum(-10.0 * n, LOG_FLOOR)
        fit = empirical_decay_rate(trace, burn_in=200)
        assert fit.truncated
        assert fit.slope == pytest.approx(10.0, abs=1e-9)
        assert fit.rounds_used == 70

    def test_floor_excluded_after_burn_in(self):
        trace = np.maximum(-1.0 * np.arange(1000), LOG_FLOOR)
        fit = empirical_decay_rate(trace, burn_in=100)
        assert fit.rounds_used == 600
        assert fit.slope == pytest.approx(1.0, abs=1e-9)

    def test_too_short(self):
        with pytest.raises(ConfigError):
            empirical_decay_rate(np.zeros(10), burn_in=0)

    def test_floored_almost_immediately(self):
        with pytest.raises(NumericError):
            empirical_decay_rate(np.maximum(-400.0 * np.arange(50), LOG_FLOOR), burn_in=0)

    def test_two_agent_bernoulli_matches_rate(self):
        scenario = bernoulli_pair(rounds=2000)
        k = report_of(scenario).k_theta
        traces = run_many(scenario, range(50))["cooperative"]
        slopes = [empirical_decay_rate(t.metrics["max_wrong_log_belief"][:, a], 200).slope
                  for t in traces for a in range(2)]
        assert abs(np.mean(slopes) - k) <= 0.15 * k


class TestReport:
    def test_contents_and_serialization(self):
        rep = report_of(bernoulli_ring3())
        d = rep.to_dict()
        assert d["theta_star_set"] == ["a"]
        assert d["argmin"] == ["a", "b"]
        np.testing.assert_allclose(d["centrality"], [1 / 3] * 3)
        assert d["constants"]["C"] == pytest.approx(math.log(0.7 / 0.3))
        assert len(d["sample_complexity"]) == 9
        assert spectral_summary(static_weights(bernoulli_ring3())).lambda_max == pytest.approx(d["lambda_max"])

    def test_symmetric_pair_has_even_centrality(self):
        rep = report_of(bernoulli_pair())
        np.testing.assert_allclose(rep.centrality, [0.5, 0.5], atol=1e-12)

    def test_not_globally_learnable(self):
        biases = [[0.7, 0.3], [0.3, 0.5]]
        truth = coin_table([[0.7, 0.5]])[0]
        lik = BoundedLikelihood(coin_table(biases))
        agents = [FiniteAgent(lik, [1.0, 0.0], truth=truth), FiniteAgent(lik, [0.0, 1.0], truth=truth)]
        assert expected_kl(agents[0], 0) < expected_kl(agents[0], 1)
        from agora.topology import ring
        with pytest.raises(AssumptionError) as err:
            rate_report(agents, ring(2))
        assert "not globally learnable" in str(err.value)
        assert err.value.exit_code == 3
