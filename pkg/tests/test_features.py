#!/usr/bin/env python3
"""
Unit tests for tile coding and sparse feature vectors
"""

import sys
import os

# Add src to Python path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np
import pytest
from offpac.errors import ConfigurationError
from offpac.features import (EligibilityTrace, SparseFeatures, SparseVector, TabularEncoder, TileCoder,
                             TileCoderConfig, hash_keys, sparse_axpy, sparse_dot,
                             tile_code_state, tile_code_state_action)


UNIT_BOX = dict(state_lows=(0.0, 0.0), state_highs=(1.0, 1.0))


class TestTileCoder:
    """Test class for hashed tile coding."""

    def setup_method(self):
        """Setup test fixtures."""
        self.cfg = TileCoderConfig(num_tilings=10, tiles_per_dim=10, hash_size=10 ** 6, **UNIT_BOX)
        self.wide_cfg = TileCoderConfig(num_tilings=10, tiles_per_dim=10, hash_size=2 ** 20, **UNIT_BOX)
        self.coder = TileCoder(self.wide_cfg)

    def test_arity_with_bias(self):
        """Test every encoding has one index per tiling plus the bias."""
        for state in [(0.0, 0.0), (0.37, 0.81), (1.0, 1.0), (0.5, 0.5)]:
            features = tile_code_state(state, self.cfg)
            assert len(features) == 11
            assert features.dimension == 10 ** 6 + 1
            assert self.cfg.bias_index in features.active_indices

    def test_arity_without_bias(self):
        """Test bias can be switched off."""
        cfg = TileCoderConfig(include_bias=False, **UNIT_BOX)
        features = tile_code_state((0.2, 0.3), cfg)
        assert len(features) == 10
        assert features.dimension == cfg.hash_size

    def test_arity_survives_collisions(self):
        """Test a tiny hash still yields distinct indices per tiling."""
        cfg = TileCoderConfig(num_tilings=10, hash_size=16, **UNIT_BOX)
        rng = np.random.default_rng(0)
        for state in rng.random((50, 2)):
            features = tile_code_state(state, cfg)
            assert len(features) == 11
            assert len(np.unique(features.active_indices)) == 11

    def test_indices_sorted_and_in_range(self):
        """Test indices are strictly increasing and below the dimension."""
        features = tile_code_state((0.63, 0.12), self.cfg)
        idx = features.active_indices
        assert np.all(np.diff(idx) > 0)
        assert idx[0] >= 0 and idx[-1] < features.dimension

    def test_determinism(self):
        """Test the same state encodes to the same indices."""
        a = tile_code_state((0.25, 0.75), self.cfg)
        b = tile_code_state((0.25, 0.75), self.cfg)
        assert a == b
        assert TileCoder(self.cfg).encode_state((0.25, 0.75)) == a

    def test_distant_states_share_only_bias(self):
        """Test states more than a tile apart in every tiling only share the bias feature."""
        s1, s2 = (0.05, 0.05), (0.55, 0.55)
        c1 = self.coder.tile_coordinates(s1)
        c2 = self.coder.tile_coordinates(s2)
        assert np.all(np.any(c1 != c2, axis=1))

        common = np.intersect1d(self.coder.encode_state(s1).active_indices,
                                self.coder.encode_state(s2).active_indices)
        assert common.tolist() == [self.wide_cfg.bias_index]

    def test_tile_offsets(self):
        """Test tiling k is displaced by k/num_tilings of a tile."""
        coords = self.coder.tile_coordinates((0.0, 0.0))
        assert coords[:, 0].tolist() == [0] * 10
        coords = self.coder.tile_coordinates((0.095, 0.0))
        # 0.95 tiles plus offset k/10 crosses into tile 1 from k = 1 on.
        assert coords[:, 0].tolist() == [0] + [1] * 9

    def test_out_of_range_state_is_clipped(self):
        """Test out-of-bounds states encode like the boundary."""
        assert self.coder.encode_state((1.7, -3.0)) == self.coder.encode_state((1.0, 0.0))

    def test_state_dimension_mismatch(self):
        """Test a state with the wrong dimensionality is rejected."""
        with pytest.raises(ConfigurationError):
            self.coder.encode_state((0.1, 0.2, 0.3))

    def test_state_action_features(self):
        """Test state-action encodings per action."""
        s = (0.4, 0.6)
        a0 = tile_code_state_action(s, 0, self.wide_cfg)
        a1 = tile_code_state_action(s, 1, self.wide_cfg)
        assert len(a0) == 11 and len(a1) == 11
        assert tile_code_state_action(s, 0, self.wide_cfg) == a0

        bias = self.wide_cfg.bias_index
        non_bias_0 = set(a0.active_indices.tolist()) - {bias}
        non_bias_1 = set(a1.active_indices.tolist()) - {bias}
        assert non_bias_0 != non_bias_1
        assert non_bias_0.isdisjoint(non_bias_1)

    def test_state_action_differs_from_state(self):
        """Test action hashing separates state-action from state features."""
        s = (0.4, 0.6)
        assert self.coder.encode_state(s) != self.coder.encode_state_action(s, 0)

    def test_negative_action_rejected(self):
        with pytest.raises(ConfigurationError):
            self.coder.encode_state_action((0.4, 0.6), -1)

    def test_encode_all_actions(self):
        phis = self.coder.encode_all_actions((0.1, 0.9), 3)
        assert len(phis) == 3
        assert phis[2] == self.coder.encode_state_action((0.1, 0.9), 2)

    def test_encode_with_actions_matches_separate_encodings(self):
        """Test the joint encoding equals the per-call state and action encodings."""
        rng = np.random.default_rng(12)
        small = TileCoder(TileCoderConfig(num_tilings=8, tiles_per_dim=4, hash_size=64, **UNIT_BOX))
        for coder in (self.coder, small):
            for state in rng.random((20, 2)):
                x, phis = coder.encode_with_actions(state, 3)
                assert x == coder.encode_state(state)
                assert phis == coder.encode_all_actions(state, 3)

    def test_hash_keys_deterministic(self):
        """Test the key hash is a pure function of the key rows."""
        keys = np.array([[0, 1, 2, 0], [3, 4, 5, 1], [0, 1, 2, 0]], dtype=np.int64)
        h = hash_keys(keys)
        assert h[0] == h[2]
        assert h[0] != h[1]
        assert np.array_equal(h, hash_keys(keys.copy()))

    def test_invalid_config(self):
        """Test invalid tile-coder settings raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            TileCoder(TileCoderConfig(num_tilings=0, **UNIT_BOX))
        with pytest.raises(ConfigurationError):
            TileCoder(TileCoderConfig(state_lows=(0.0,), state_highs=(1.0, 1.0)))
        with pytest.raises(ConfigurationError):
            TileCoder(TileCoderConfig(state_lows=(1.0, 0.0), state_highs=(0.0, 1.0)))


class TestSparseOps:
    """Test class for sparse dot products and in-place updates."""

    def test_sparse_dot_zero_weights(self):
        f = SparseFeatures.from_indices([1, 4, 7], 10)
        assert sparse_dot(f, np.zeros(10)) == 0.0

    def test_sparse_dot_counts_active(self):
        cfg = TileCoderConfig(**UNIT_BOX)
        f = tile_code_state((0.3, 0.3), cfg)
        assert sparse_dot(f, np.ones(cfg.dimension)) == 11.0

    def test_sparse_dot_arithmetic(self):
        f = SparseFeatures.from_indices([2, 5], 8)
        assert sparse_dot(f, np.arange(8, dtype=float)) == 7.0

    def test_sparse_dot_linear(self):
        rng = np.random.default_rng(3)
        f = SparseFeatures.from_indices([0, 3, 9, 11], 12)
        w1, w2 = rng.normal(size=12), rng.normal(size=12)
        assert abs(sparse_dot(f, w1 + w2) - sparse_dot(f, w1) - sparse_dot(f, w2)) < 1e-12

    def test_sparse_dot_length_mismatch(self):
        f = SparseFeatures.from_indices([0, 1], 5)
        with pytest.raises(ConfigurationError):
            sparse_dot(f, np.zeros(4))

    def test_sparse_axpy(self):
        f = SparseFeatures.from_indices([0, 3], 6)
        w = np.zeros(6)
        sparse_axpy(0.0, f, w)
        assert np.all(w == 0.0)
        sparse_axpy(1.0, f, w)
        assert w.tolist() == [1.0, 0.0, 0.0, 1.0, 0.0, 0.0]

    def test_sparse_axpy_inverse(self):
        rng = np.random.default_rng(5)
        w = rng.normal(size=6)
        original = w.copy()
        f = SparseFeatures.from_indices([1, 2, 5], 6)
        sparse_axpy(0.125, f, w)
        sparse_axpy(-0.125, f, w)
        assert np.array_equal(w, original)

    def test_sparse_axpy_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            sparse_axpy(1.0, SparseFeatures.from_indices([0], 3), np.zeros(2))

    def test_from_indices_validation(self):
        """Test SparseFeatures invariants are enforced."""
        assert SparseFeatures.from_indices([5, 1, 3], 6).active_indices.tolist() == [1, 3, 5]
        with pytest.raises(ConfigurationError):
            SparseFeatures.from_indices([1, 1], 4)
        with pytest.raises(ConfigurationError):
            SparseFeatures.from_indices([4], 4)
        with pytest.raises(ConfigurationError):
            SparseFeatures.from_indices([0], 0)


class TestSparseVector:
    """Test class for index/coefficient vectors."""

    def test_from_terms_sums_repeats(self):
        v = SparseVector.from_terms(np.array([4, 1, 4]), np.array([0.5, 2.0, 1.5]), 5)
        assert v.indices.tolist() == [1, 4]
        assert v.values.tolist() == [2.0, 2.0]
        assert v.dot(np.arange(5.0)) == 2.0 + 8.0

    def test_zeros(self):
        z = SparseVector.zeros(7)
        assert len(z) == 0
        assert z.dot(np.ones(7)) == 0.0
        assert np.all(z.to_dense() == 0.0)


class TestEligibilityTrace:
    """Test class for support-indexed trace vectors."""

    def test_accumulate_decays_then_adds(self):
        """Test e <- rho (x + decay e) against the dense recursion."""
        e = EligibilityTrace(6)
        dense = np.zeros(6)
        steps = [(0.0, [0, 2], 1.0), (0.5, [2, 3], 2.0), (0.9, [5], 0.5), (0.3, [0, 5], 1.0)]
        for decay, active, rho in steps:
            x = SparseFeatures.from_indices(active, 6)
            e.accumulate(decay, x, rho)
            dense = rho * (x.to_dense() + decay * dense)
            assert np.allclose(e.to_dense(), dense)
        assert e.indices.tolist() == np.flatnonzero(dense).tolist()
        assert np.allclose(e.values, dense[e.indices])

    def test_zero_decay_keeps_only_current_terms(self):
        e = EligibilityTrace(4)
        e.accumulate(0.9, SparseFeatures.from_indices([0, 1], 4))
        e.accumulate(0.0, SparseVector(np.array([3]), np.array([-2.0]), 4))
        assert e.to_dense().tolist() == [0.0, 0.0, 0.0, -2.0]
        assert len(e) == 1

    def test_pruning_drops_small_entries(self):
        e = EligibilityTrace(3)
        e.accumulate(1.0, SparseVector(np.array([0, 1]), np.array([1.0, 2e-8]), 3))
        assert e.indices.tolist() == [0, 1]
        e.accumulate(0.1, SparseVector.zeros(3))
        assert e.indices.tolist() == [0]
        assert e.to_dense()[1] == 0.0

    def test_reset(self):
        e = EligibilityTrace(5)
        e.accumulate(0.5, SparseFeatures.from_indices([1, 4], 5))
        e.reset()
        assert len(e) == 0
        assert np.all(e.to_dense() == 0.0)
        e.accumulate(0.5, SparseFeatures.from_indices([4], 5))
        assert e.to_dense().tolist() == [0.0, 0.0, 0.0, 0.0, 1.0]

    def test_dot_and_add_to(self):
        e = EligibilityTrace(4)
        e.accumulate(0.0, SparseVector(np.array([1, 3]), np.array([2.0, -1.0]), 4))
        w = np.array([1.0, 2.0, 3.0, 4.0])
        assert e.dot(w) == 0.0
        e.add_to(w, 0.5)
        assert w.tolist() == [1.0, 3.0, 3.0, 3.5]

    def test_add_combination(self):
        """Test weights += scale (a e + b x) and the touched indices."""
        e = EligibilityTrace(6)
        e.accumulate(0.0, SparseVector(np.array([0, 2]), np.array([1.0, -0.5]), 6))
        x = SparseFeatures.from_indices([2, 5], 6)
        w = np.ones(6)
        expected = w + 0.1 * (2.0 * e.to_dense() - 3.0 * x.to_dense())
        touched = e.add_combination(w, 0.1, 2.0, -3.0, x)
        assert np.allclose(w, expected)
        assert sorted(touched.tolist()) == [0, 2, 5]
        again = np.ones(6)
        e.add_combination(again, 0.1, 2.0, -3.0, x)
        assert np.array_equal(again, w)

    def test_dimension_mismatch(self):
        e = EligibilityTrace(3)
        with pytest.raises(ConfigurationError):
            e.accumulate(0.5, SparseFeatures.from_indices([0], 4))
        with pytest.raises(ConfigurationError):
            e.add_to(np.zeros(4), 1.0)
        with pytest.raises(ConfigurationError):
            e.dot(np.zeros(2))


class TestTabularEncoder:
    """Test class for one-hot encodings."""

    def test_one_hot_indices(self):
        enc = TabularEncoder(3, 2)
        assert enc.encode_state(2).active_indices.tolist() == [2]
        assert enc.encode_state_action(2, 1).active_indices.tolist() == [5]
        assert enc.dimension == 6 and enc.state_dimension == 3

    def test_action_feature_matrix(self):
        phi = TabularEncoder(3, 2).action_feature_matrix()
        assert phi.shape == (3, 2, 6)
        assert phi[1, 0, 2] == 1.0
        assert phi.sum() == 6.0

    def test_encode_with_actions(self):
        enc = TabularEncoder(3, 2)
        x, phis = enc.encode_with_actions(1)
        assert x.active_indices.tolist() == [1]
        assert [p.active_indices.tolist() for p in phis] == [[2], [3]]


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
