"""
Sparse binary features: hashed tile coding of continuous states, state-action
features, and the index/coefficient vectors used for scores and traces.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError


logger = logging.getLogger(__name__)

TRACE_PRUNE_THRESHOLD = 1e-8

# 64-bit FNV-1a over the key columns, followed by the splitmix64 finalizer.
_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)
_MIX_1 = np.uint64(0xFF51AFD7ED558CCD)
_MIX_2 = np.uint64(0xC4CEB9FE1A85EC53)
_SHIFT = np.uint64(33)

_EMPTY_INDICES = np.zeros(0, dtype=np.int64)
_EMPTY_VALUES = np.zeros(0, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SparseFeatures:
    """Binary vector given by its sorted, distinct active indices."""

    active_indices: np.ndarray
    dimension: int

    @classmethod
    def from_indices(cls, indices: Sequence[int], dimension: int) -> "SparseFeatures":
        """Build features from arbitrary indices, validating the invariants."""
        if dimension <= 0:
            raise ConfigurationError(f"feature dimension must be positive, got {dimension}")
        arr = np.asarray(indices, dtype=np.int64)
        unique = np.unique(arr)
        if unique.size != arr.size:
            raise ConfigurationError("active indices must be distinct")
        if unique.size and (unique[0] < 0 or unique[-1] >= dimension):
            raise ConfigurationError(f"active indices must lie in [0, {dimension})")
        return cls(unique, int(dimension))

    def __len__(self) -> int:
        return int(self.active_indices.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseFeatures):
            return NotImplemented
        return (self.dimension == other.dimension
                and np.array_equal(self.active_indices, other.active_indices))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dimension)
        dense[self.active_indices] = 1.0
        return dense


@dataclass(eq=False)
class SparseVector:
    """Real vector stored as sorted indices with coefficients (scores, expected features)."""

    indices: np.ndarray
    values: np.ndarray
    dimension: int

    @classmethod
    def zeros(cls, dimension: int) -> "SparseVector":
        return cls(_EMPTY_INDICES, _EMPTY_VALUES, int(dimension))

    @classmethod
    def from_terms(cls, indices: np.ndarray, values: np.ndarray, dimension: int) -> "SparseVector":
        """Sum possibly repeated (index, value) terms into a vector."""
        if indices.size == 0:
            return cls.zeros(dimension)
        unique, inverse = np.unique(indices, return_inverse=True)
        summed = np.bincount(inverse, weights=values, minlength=unique.size)
        return cls(unique, summed, int(dimension))

    def __len__(self) -> int:
        return int(self.indices.size)

    def dot(self, weights: np.ndarray) -> float:
        _check_length(self.dimension, weights)
        if self.indices.size == 0:
            return 0.0
        return float(np.dot(self.values, weights[self.indices]))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dimension)
        dense[self.indices] = self.values
        return dense


VectorLike = Union[SparseFeatures, SparseVector]


def _terms(vec: VectorLike) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(vec, SparseFeatures):
        return vec.active_indices, np.ones(vec.active_indices.size)
    return vec.indices, vec.values


def _check_length(dimension: int, weights: np.ndarray) -> None:
    if weights.shape[0] != dimension:
        raise ConfigurationError(
            f"weight vector length {weights.shape[0]} does not match feature dimension {dimension}")


class EligibilityTrace:
    """
    Trace vector kept as a dense coefficient array plus the list of its nonzero
    indices. Decay, accumulation, pruning and weight updates touch only that list,
    so a step costs O(support) however large the dimension is.
    """

    def __init__(self, dimension: int, threshold: float = TRACE_PRUNE_THRESHOLD):
        self.dimension = int(dimension)
        self.threshold = threshold
        self.support = _EMPTY_INDICES
        self._dense = np.zeros(self.dimension)
        self._member = np.zeros(self.dimension, dtype=bool)
        self._scratch = np.zeros(self.dimension)

    def __len__(self) -> int:
        return int(self.support.size)

    @property
    def indices(self) -> np.ndarray:
        return np.sort(self.support)

    @property
    def values(self) -> np.ndarray:
        return self._dense[self.indices]

    def reset(self) -> None:
        self._dense[self.support] = 0.0
        self._member[self.support] = False
        self.support = _EMPTY_INDICES

    def accumulate(self, decay: float, terms: "VectorLike", rho: float = 1.0) -> None:
        """e <- rho (terms + decay e), then drop entries below the pruning threshold."""
        if terms.dimension != self.dimension:
            raise ConfigurationError(f"dimension mismatch: {terms.dimension} vs {self.dimension}")
        idx, val = _terms(terms)
        if decay == 0.0:
            self.reset()
        else:
            self._dense[self.support] *= decay
        self._dense[idx] += val
        fresh = idx[~self._member[idx]]
        if fresh.size:
            self._member[fresh] = True
            self.support = np.concatenate((self.support, fresh))
        if rho != 1.0:
            self._dense[self.support] *= rho
        self._prune()

    def _prune(self) -> None:
        small = np.abs(self._dense[self.support]) < self.threshold
        if small.any():
            dropped = self.support[small]
            self._dense[dropped] = 0.0
            self._member[dropped] = False
            self.support = self.support[~small]

    def dot(self, weights: np.ndarray) -> float:
        _check_length(self.dimension, weights)
        if self.support.size == 0:
            return 0.0
        return float(np.dot(self._dense[self.support], weights[self.support]))

    def add_to(self, weights: np.ndarray, scale: float = 1.0) -> None:
        """weights[i] += scale * e[i] over the support."""
        _check_length(self.dimension, weights)
        weights[self.support] += scale * self._dense[self.support]

    def add_combination(self, weights: np.ndarray, scale: float, a: float, b: float,
                        other: "VectorLike") -> np.ndarray:
        """weights += scale * (a e + b other); returns the touched indices."""
        _check_length(self.dimension, weights)
        o_idx, o_val = _terms(other)
        buf = self._scratch
        buf[self.support] = a * self._dense[self.support]
        buf[o_idx] += b * o_val
        touched = np.concatenate((self.support, o_idx[~self._member[o_idx]]))
        weights[touched] += scale * buf[touched]
        buf[touched] = 0.0
        return touched

    def to_dense(self) -> np.ndarray:
        return self._dense.copy()


def sparse_dot(features: SparseFeatures, weights: np.ndarray) -> float:
    """Sum of ``weights`` at the active indices."""
    _check_length(features.dimension, weights)
    return float(np.sum(weights[features.active_indices]))


def sparse_axpy(scale: float, features: SparseFeatures, weights: np.ndarray) -> None:
    """In place: weights[i] += scale for every active index i."""
    _check_length(features.dimension, weights)
    weights[features.active_indices] += scale


@dataclass(frozen=True)
class TileCoderConfig:
    """Hashed tile coding over a box-bounded continuous state space."""

    num_tilings: int = 10
    tiles_per_dim: int = 10
    hash_size: int = 10 ** 6
    state_lows: Tuple[float, ...] = ()
    state_highs: Tuple[float, ...] = ()
    include_bias: bool = True

    @property
    def dimension(self) -> int:
        return self.hash_size + (1 if self.include_bias else 0)

    @property
    def arity(self) -> int:
        return self.num_tilings + (1 if self.include_bias else 0)

    @property
    def bias_index(self) -> int:
        return self.hash_size

    def validate(self) -> None:
        if self.num_tilings <= 0 or self.tiles_per_dim <= 0 or self.hash_size <= 0:
            raise ConfigurationError("num_tilings, tiles_per_dim and hash_size must be positive")
        if self.hash_size < self.num_tilings:
            raise ConfigurationError("hash_size must be at least num_tilings")
        if len(self.state_lows) != len(self.state_highs) or not self.state_lows:
            raise ConfigurationError("state_lows and state_highs must be non-empty and equally long")
        if any(lo >= hi for lo, hi in zip(self.state_lows, self.state_highs)):
            raise ConfigurationError("every state_low must be below its state_high")


def hash_keys(keys: np.ndarray) -> np.ndarray:
    """Seedless 64-bit hash of each row of a non-negative integer key matrix."""
    h = np.full(keys.shape[0], _FNV_OFFSET, dtype=np.uint64)
    for column in keys.T.astype(np.uint64):
        h ^= column
        h *= _FNV_PRIME
    h ^= h >> _SHIFT
    h *= _MIX_1
    h ^= h >> _SHIFT
    h *= _MIX_2
    h ^= h >> _SHIFT
    return h


class TileCoder:
    """
    Tile coder for one TileCoderConfig.

    Tiling k is displaced by k/num_tilings of a tile width in every dimension; each
    (tiling, tile coordinates, action) key is hashed into ``hash_size`` slots and the
    bias feature, when enabled, sits at index ``hash_size``.
    """

    def __init__(self, cfg: TileCoderConfig):
        cfg.validate()
        self.cfg = cfg
        self.lows = np.asarray(cfg.state_lows, dtype=np.float64)
        self.highs = np.asarray(cfg.state_highs, dtype=np.float64)
        self.scale = cfg.tiles_per_dim / (self.highs - self.lows)
        self.offsets = (np.arange(cfg.num_tilings, dtype=np.float64) / cfg.num_tilings)[:, None]
        self.tiling_ids = np.arange(cfg.num_tilings, dtype=np.int64)[:, None]
        self.dimension = cfg.dimension
        self.state_dimension = cfg.dimension

    def tile_coordinates(self, state: Sequence[float]) -> np.ndarray:
        """Integer tile coordinates, one row per tiling."""
        s = np.asarray(state, dtype=np.float64)
        if s.shape != self.lows.shape:
            raise ConfigurationError(
                f"state has {s.size} dimensions, tile coder expects {self.lows.size}")
        scaled = (np.clip(s, self.lows, self.highs) - self.lows) * self.scale
        return np.floor(scaled[None, :] + self.offsets).astype(np.int64)

    def _hashed_rows(self, state: Sequence[float], action_keys: Sequence[int]) -> np.ndarray:
        """Hashed indices of shape (len(action_keys), num_tilings) from a single hash call."""
        coords = self.tile_coordinates(state)
        n = self.cfg.num_tilings
        block = np.hstack((self.tiling_ids, coords))
        keys = np.hstack((np.tile(block, (len(action_keys), 1)),
                          np.repeat(np.asarray(action_keys, dtype=np.int64), n)[:, None]))
        indices = (hash_keys(keys) % np.uint64(self.cfg.hash_size)).astype(np.int64)
        return indices.reshape(len(action_keys), n)

    def _features(self, row: np.ndarray) -> SparseFeatures:
        indices = np.sort(row)
        if np.any(indices[1:] == indices[:-1]):
            indices = np.sort(_resolve_collisions(row, self.cfg.hash_size))
        if self.cfg.include_bias:
            # The bias index is above every hashed slot, so order is kept.
            indices = np.append(indices, self.cfg.bias_index)
        return SparseFeatures(indices, self.dimension)

    def encode_state(self, state: Sequence[float]) -> SparseFeatures:
        return self._features(self._hashed_rows(state, (0,))[0])

    def encode_state_action(self, state: Sequence[float], action: int) -> SparseFeatures:
        if action < 0:
            raise ConfigurationError(f"action id must be non-negative, got {action}")
        return self._features(self._hashed_rows(state, (int(action) + 1,))[0])

    def encode_all_actions(self, state: Sequence[float], num_actions: int) -> Tuple[SparseFeatures, ...]:
        rows = self._hashed_rows(state, range(1, num_actions + 1))
        return tuple(self._features(row) for row in rows)

    def encode_with_actions(self, state: Sequence[float],
                            num_actions: int) -> Tuple[SparseFeatures, Tuple[SparseFeatures, ...]]:
        """State features and every action's features, hashed together."""
        rows = self._hashed_rows(state, range(num_actions + 1))
        return self._features(rows[0]), tuple(self._features(row) for row in rows[1:])


def _resolve_collisions(indices: np.ndarray, hash_size: int) -> np.ndarray:
    # Linear probing keeps the arity constant when two tilings hash together.
    taken = set()
    resolved = []
    for idx in indices.tolist():
        while idx in taken:
            idx = (idx + 1) % hash_size
        taken.add(idx)
        resolved.append(idx)
    return np.asarray(resolved, dtype=np.int64)


@lru_cache(maxsize=32)
def _coder_for(cfg: TileCoderConfig) -> TileCoder:
    return TileCoder(cfg)


def tile_code_state(state: Sequence[float], cfg: TileCoderConfig) -> SparseFeatures:
    """State features x_s."""
    return _coder_for(cfg).encode_state(state)


def tile_code_state_action(state: Sequence[float], action_id: int, cfg: TileCoderConfig) -> SparseFeatures:
    """State-action features phi_{s,a}."""
    return _coder_for(cfg).encode_state_action(state, action_id)


class TabularEncoder:
    """One-hot state and state-action features for finite MDPs."""

    def __init__(self, num_states: int, num_actions: int):
        self.num_states = num_states
        self.num_actions = num_actions
        self.state_dimension = num_states
        self.dimension = num_states * num_actions

    def encode_state(self, state: int) -> SparseFeatures:
        return SparseFeatures(np.array([int(state)], dtype=np.int64), self.state_dimension)

    def encode_state_action(self, state: int, action: int) -> SparseFeatures:
        return SparseFeatures(np.array([int(state) * self.num_actions + int(action)], dtype=np.int64),
                              self.dimension)

    def encode_all_actions(self, state: int, num_actions: int = None) -> Tuple[SparseFeatures, ...]:
        return tuple(self.encode_state_action(state, a) for a in range(self.num_actions))

    def encode_with_actions(self, state: int,
                            num_actions: int = None) -> Tuple[SparseFeatures, Tuple[SparseFeatures, ...]]:
        return self.encode_state(state), self.encode_all_actions(state)

    def action_feature_matrix(self) -> np.ndarray:
        """Dense phi as an array of shape (num_states, num_actions, dimension)."""
        return np.eye(self.dimension).reshape(self.num_states, self.num_actions, self.dimension)
