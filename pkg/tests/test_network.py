import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from distal.errors import ConfigError, TooLarge
from distal.network import (ActivationModel, ActivationSample, RngStream, active_neighbor_set,
                            derive_seed, edge_effective_probability,
                            enumerate_activation_outcomes, sample_activation)


def draws(model, seed, count):
    rng = RngStream(seed)
    return [sample_activation(model, rng) for _ in range(count)]


class TestModel:
    def test_probabilities_validated(self, spec2):
        with pytest.raises(ConfigError):
            ActivationModel([1.0], [1.0, 0.0])
        with pytest.raises(ConfigError):
            ActivationModel([1.5], [1.0, 1.0])
        with pytest.raises(ConfigError):
            ActivationModel([0.5], [0.5, 0.5, 0.5]).check(spec2)

    def test_full_model_always_full(self, spec2):
        for s in draws(ActivationModel.full(spec2), 1, 100):
            assert s.active_agents == {0, 1} and s.active_links == {0}

    def test_marginal_frequency(self, spec2):
        model = ActivationModel.uniform(spec2, 0.5, 0.5)
        agents = np.array([s.agents for s in draws(model, 7, 10_000)])
        assert abs(agents[:, 0].mean() - 0.5) <= 0.02

    def test_lag_one_autocorrelation(self, spec2):
        model = ActivationModel.uniform(spec2, 0.5, 0.5)
        seq = draws(model, 11, 10_000)
        cols = np.array([np.concatenate([s.agents, s.links]) for s in seq], dtype=float)
        for c in cols.T:
            assert abs(np.corrcoef(c[:-1], c[1:])[0, 1]) <= 0.03

    def test_deterministic_per_seed(self, spec2):
        model = ActivationModel.uniform(spec2, 0.3, 0.7)
        assert draws(model, 99, 50) == draws(model, 99, 50)
        assert draws(model, 99, 50) != draws(model, 98, 50)

    def test_derived_seeds_distinct(self):
        seeds = {derive_seed(5, r) for r in range(1000)}
        assert len(seeds) == 1000
        assert derive_seed(5, 3) == derive_seed(5, 3)


class TestNeighbourSet:
    def test_full(self, spec2):
        assert active_neighbor_set(ActivationSample.full(spec2), spec2, 0) == {1}

    def test_link_down(self, spec2):
        s = ActivationSample(np.array([True, True]), np.array([False]))
        assert active_neighbor_set(s, spec2, 0) == set()
        assert not s.edge_fires(spec2)[0]

    def test_neighbour_inactive(self, spec2):
        s = ActivationSample(np.array([True, False]), np.array([True]))
        assert active_neighbor_set(s, spec2, 0) == set()
        assert not s.edge_fires(spec2)[0]


class TestEffectiveProbability:
    def test_full(self, spec2):
        alpha, amin = edge_effective_probability(ActivationModel.full(spec2), spec2)
        assert_allclose(alpha, [1.0]) and amin == 1.0

    def test_product(self, spec2):
        alpha, _ = edge_effective_probability(ActivationModel([0.5], [0.8, 0.8]), spec2)
        assert alpha[0] == pytest.approx(0.32)

    def test_minimum(self, spec2):
        _, amin = edge_effective_probability(ActivationModel([0.25], [1.0, 1.0]), spec2)
        assert amin == 0.25


class TestEnumeration:
    def test_three_fair_coins(self, spec2):
        out = enumerate_activation_outcomes(ActivationModel.uniform(spec2, 0.5, 0.5))
        assert len(out) == 8
        assert_allclose([p for _, p in out], 0.125)

    def test_full_single_outcome(self, spec2):
        out = enumerate_activation_outcomes(ActivationModel.full(spec2))
        assert len(out) == 1 and out[0][1] == 1.0 and out[0][0].full

    def test_size_guard(self):
        with pytest.raises(TooLarge):
            enumerate_activation_outcomes(ActivationModel(np.full(10, 0.5), np.full(8, 0.5)))

    @given(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=4),
           st.lists(st.floats(0.05, 1.0), min_size=2, max_size=5))
    def test_probabilities_sum_to_one(self, beta, gamma):
        out = enumerate_activation_outcomes(ActivationModel(beta, gamma))
        assert sum(p for _, p in out) == pytest.approx(1.0)

    def test_matches_sampling_frequencies(self, spec2):
        model = ActivationModel([0.7], [0.4, 0.9])
        out = enumerate_activation_outcomes(model)
        n = 50_000
        seq = draws(model, 3, n)
        for sample, p in out:
            freq = sum(s == sample for s in seq) / n
            se = np.sqrt(p * (1 - p) / n)
            assert abs(freq - p) <= 3 * se + 1e-12
