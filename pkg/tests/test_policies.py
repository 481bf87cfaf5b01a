#!/usr/bin/env python3
"""
Unit tests for behavior, Gibbs and value-based target policies
"""

import sys
import os
from dataclasses import replace

# Add src to Python path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np
import pytest
from offpac.errors import ConfigurationError
from offpac.features import SparseFeatures, TabularEncoder, TileCoder, TileCoderConfig
from offpac.policies import (GibbsPolicy, GreedyTarget, LinearActionValues, SoftmaxTarget,
                             UniformBehavior, gibbs_probs, gibbs_score, greedy_action,
                             importance_ratio, sample_from, softmax, softmax_target_probs)


def constant_values(q):
    """Target arguments reporting the fixed values ``q`` in every state."""
    values = np.asarray(q, dtype=float)
    return (lambda phis: values), (lambda state: ())


def random_gibbs_points(kind, count, rng):
    """(policy, state, action) triples with random weights on a tabular or tile-coded encoder."""
    if kind == 'tabular':
        encoder = TabularEncoder(5, 4)
        draw_state = lambda: int(rng.integers(5))
    else:
        encoder = TileCoder(TileCoderConfig(num_tilings=4, tiles_per_dim=4, hash_size=256,
                                            state_lows=(0.0, 0.0), state_highs=(1.0, 1.0)))
        draw_state = lambda: tuple(rng.random(2))
    for _ in range(count):
        u = rng.normal(size=encoder.dimension)
        yield (GibbsPolicy(u, (0, 1, 2, 3), encoder.encode_state_action), draw_state(),
               int(rng.integers(4)))


class TestGibbsPolicy:
    """Test class for the Gibbs actor policy."""

    def setup_method(self):
        """Setup test fixtures."""
        self.encoder = TabularEncoder(3, 4)
        rng = np.random.default_rng(11)
        self.u = rng.normal(size=self.encoder.dimension)
        self.policy = GibbsPolicy(self.u, (0, 1, 2, 3), self.encoder.encode_state_action)

    def test_probabilities_sum_to_one(self):
        """Test pi(.|s) is a positive distribution."""
        for s in range(3):
            probs = gibbs_probs(self.policy, s)
            assert np.all(probs > 0.0)
            assert abs(probs.sum() - 1.0) < 1e-12

    def test_zero_weights_give_uniform(self):
        """Test u = 0 yields the uniform distribution."""
        policy = GibbsPolicy(np.zeros(self.encoder.dimension), (0, 1, 2, 3),
                             self.encoder.encode_state_action)
        assert np.allclose(policy.probs(1), 0.25)

    def test_probabilities_match_definition(self):
        """Test probabilities equal exp(u.phi) normalized."""
        s = 2
        logits = np.array([self.u[s * 4 + a] for a in range(4)])
        expected = np.exp(logits) / np.exp(logits).sum()
        assert np.allclose(self.policy.probs(s), expected, atol=1e-14)

    def test_large_logits_do_not_overflow(self):
        """Test huge weights still give a finite distribution."""
        u = np.zeros(self.encoder.dimension)
        u[0], u[1] = 1000.0, 999.0
        probs = GibbsPolicy(u, (0, 1, 2, 3), self.encoder.encode_state_action).probs(0)
        assert np.all(np.isfinite(probs))
        assert abs(probs.sum() - 1.0) < 1e-12
        assert probs[0] > probs[1] > probs[2]

    def test_score_expectation_is_zero(self):
        """Test sum_a pi(a|s) psi(s,a) = 0."""
        for s in range(3):
            probs = self.policy.probs(s)
            total = sum(probs[a] * self.policy.score(s, a).to_dense() for a in range(4))
            assert np.max(np.abs(total)) < 1e-12

    def test_score_is_log_gradient(self):
        """Test psi matches a finite-difference gradient of log pi."""
        s, a, h = 1, 2, 1e-6
        psi = self.policy.score(s, a).to_dense()
        for i in range(self.encoder.dimension):
            up, down = self.u.copy(), self.u.copy()
            up[i] += h
            down[i] -= h
            lp_up = np.log(GibbsPolicy(up, (0, 1, 2, 3), self.encoder.encode_state_action).probs(s)[a])
            lp_down = np.log(GibbsPolicy(down, (0, 1, 2, 3), self.encoder.encode_state_action).probs(s)[a])
            assert abs((lp_up - lp_down) / (2 * h) - psi[i]) < 1e-6

    @pytest.mark.parametrize('kind', ['tabular', 'tile'])
    def test_score_is_log_gradient_at_random_points(self, kind):
        """Test psi against central differences of log pi at 100 random (u, s, a)."""
        h = 1e-6
        for policy, s, a in random_gibbs_points(kind, 100, np.random.default_rng(17)):
            phis = policy.action_features(s)
            psi = policy.score(s, a, phis).to_dense()
            active = np.unique(np.concatenate([phi.active_indices for phi in phis]))
            outside = np.ones(psi.size, dtype=bool)
            outside[active] = False
            assert not np.any(psi[outside])
            for i in active:
                up, down = policy.u.copy(), policy.u.copy()
                up[i] += h
                down[i] -= h
                lp_up = np.log(gibbs_probs(replace(policy, u=up), None, phis)[a])
                lp_down = np.log(gibbs_probs(replace(policy, u=down), None, phis)[a])
                assert abs((lp_up - lp_down) / (2 * h) - psi[i]) < 1e-6

    def test_score_accepts_precomputed_features(self):
        """Test passing phis and probs gives the same score."""
        phis = self.policy.action_features(0)
        probs = gibbs_probs(self.policy, None, phis)
        direct = gibbs_score(self.policy, 0, 3).to_dense()
        cached = gibbs_score(self.policy, None, 3, phis, probs).to_dense()
        assert np.array_equal(direct, cached)

    def test_score_rejects_unknown_action(self):
        with pytest.raises(ConfigurationError):
            self.policy.score(0, 7)

    def test_sample_frequencies(self):
        """Test sampled actions follow pi."""
        rng = np.random.default_rng(0)
        counts = np.bincount([self.policy.sample(0, rng) for _ in range(20000)], minlength=4)
        assert np.allclose(counts / 20000, self.policy.probs(0), atol=0.02)


class TestTargets:
    """Test class for greedy and softmax targets."""

    def test_greedy_ties_break_low(self):
        """Test ties go to the lowest action id."""
        target = GreedyTarget(*constant_values([1.0, 3.0, 3.0]))
        assert greedy_action(target, None) == 1
        assert target.probs(None).tolist() == [0.0, 1.0, 0.0]
        assert target.sample(None, np.random.default_rng(0)) == 1

    def test_softmax_target_matches_definition(self):
        q = np.array([0.5, -1.0, 2.0])
        target = SoftmaxTarget(0.5, *constant_values(q))
        expected = np.exp(q / 0.5) / np.exp(q / 0.5).sum()
        assert np.allclose(softmax_target_probs(target, None), expected)

    def test_softmax_target_temperature_limits(self):
        """Test small tau approaches greedy and large tau approaches uniform."""
        q = np.array([0.0, 1.0, 0.5])
        cold = SoftmaxTarget(1e-3, *constant_values(q)).probs(None)
        hot = SoftmaxTarget(1e6, *constant_values(q)).probs(None)
        assert cold[1] > 0.999
        assert np.allclose(hot, 1.0 / 3.0, atol=1e-5)

    def test_softmax_target_large_values(self):
        target = SoftmaxTarget(0.01, *constant_values([1e4, 1e4 - 1.0]))
        probs = target.probs(None)
        assert np.all(np.isfinite(probs))
        assert probs[0] > 0.999

    def test_nonpositive_tau_rejected(self):
        with pytest.raises(ConfigurationError):
            SoftmaxTarget(0.0, *constant_values(np.zeros(2))).probs(None)

    def test_linear_action_values(self):
        """Test values are read from action features and targets act through an encoder."""
        encoder = TabularEncoder(2, 3)
        q_fn = LinearActionValues(np.arange(6, dtype=float))
        assert q_fn(encoder.encode_all_actions(1)).tolist() == [3.0, 4.0, 5.0]
        assert greedy_action(GreedyTarget(q_fn, encoder.encode_all_actions), 0) == 2

    def test_state_and_feature_paths_agree(self):
        """Test acting from a state and scoring its action features give one distribution."""
        encoder = TabularEncoder(3, 4)
        q_fn = LinearActionValues(np.random.default_rng(9).normal(size=encoder.dimension))
        for target in (SoftmaxTarget(0.7, q_fn, encoder.encode_all_actions),
                       GreedyTarget(q_fn, encoder.encode_all_actions)):
            for s in range(3):
                phis = encoder.encode_all_actions(s)
                assert np.array_equal(target.probs(s), target.probs_of(phis))
                assert np.array_equal(target.probs_of(phis), target.probs_from_values(q_fn(phis)))

    def test_acting_needs_action_features(self):
        target = GreedyTarget(LinearActionValues(np.zeros(4)))
        phis = TabularEncoder(2, 2).encode_all_actions(0)
        assert target.probs_of(phis).tolist() == [1.0, 0.0]
        with pytest.raises(ConfigurationError):
            target.probs(0)


class TestBehaviorAndRatios:
    """Test class for the uniform behavior policy and importance ratios."""

    def test_uniform_behavior(self):
        b = UniformBehavior(5)
        assert np.allclose(b.probs(), 0.2)
        assert b.prob(None, 3) == 0.2
        rng = np.random.default_rng(1)
        draws = [b.sample(None, rng) for _ in range(1000)]
        assert min(draws) == 0 and max(draws) == 4

    def test_importance_ratio(self):
        assert importance_ratio(0.6, 0.2) == pytest.approx(3.0)
        assert importance_ratio(0.0, 0.5) == 0.0
        with pytest.raises(ConfigurationError):
            importance_ratio(0.5, 0.0)

    def test_softmax_shift_invariant(self):
        z = np.array([0.1, 0.7, -0.3])
        assert np.allclose(softmax(z), softmax(z + 100.0))

    def test_sample_from_consumes_one_draw(self):
        """Test one uniform draw per sample keeps streams aligned."""
        probs = np.array([0.2, 0.5, 0.3])
        rng_a, rng_b = np.random.default_rng(4), np.random.default_rng(4)
        sample_from(probs, rng_a)
        rng_b.random()
        assert rng_a.random() == rng_b.random()

    def test_sample_from_degenerate(self):
        rng = np.random.default_rng(2)
        assert all(sample_from(np.array([0.0, 1.0, 0.0]), rng) == 1 for _ in range(100))

    def test_sparse_features_in_policy(self):
        """Test a policy over hand-built features with shared indices."""
        feats = {0: SparseFeatures.from_indices([0, 2], 3), 1: SparseFeatures.from_indices([1, 2], 3)}
        policy = GibbsPolicy(np.array([1.0, 0.0, 5.0]), (0, 1), lambda s, a: feats[a])
        probs = policy.probs(None)
        assert probs[0] == pytest.approx(np.e / (np.e + 1.0))
        psi = policy.score(None, 0).to_dense()
        # The shared index cancels out of the score.
        assert psi[2] == pytest.approx(0.0, abs=1e-15)
        assert psi[0] == pytest.approx(1.0 - probs[0])


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
