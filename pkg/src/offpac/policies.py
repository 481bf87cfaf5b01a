"""
Behavior and target policies: uniform behavior, the Gibbs actor policy with its
score function, and greedy/softmax targets over linear action values.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError
from .features import SparseFeatures, SparseVector, sparse_dot


logger = logging.getLogger(__name__)

FeatureFn = Callable[[Any, int], SparseFeatures]
QFn = Callable[[Sequence[SparseFeatures]], np.ndarray]
ActionFeatureFn = Callable[[Any], Tuple[SparseFeatures, ...]]


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax with the max logit subtracted before exponentiation."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def sample_from(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of one index; consumes exactly one uniform from ``rng``."""
    idx = int(np.searchsorted(np.cumsum(probs), rng.random(), side='right'))
    return min(idx, len(probs) - 1)


def action_values(weights: np.ndarray, phis: Sequence[SparseFeatures]) -> np.ndarray:
    """Linear values dot(weights, phi) for each action's features."""
    return np.array([sparse_dot(phi, weights) for phi in phis])


def importance_ratio(pi_prob: float, b_prob: float) -> float:
    """rho = pi(a|s) / b(a|s)."""
    if b_prob <= 0.0:
        raise ConfigurationError(f"behavior probability must be positive, got {b_prob}")
    return pi_prob / b_prob


@dataclass(frozen=True)
class UniformBehavior:
    """b(a|s) = 1/num_actions everywhere."""

    num_actions: int

    def probs(self, state: Any = None) -> np.ndarray:
        return np.full(self.num_actions, 1.0 / self.num_actions)

    def prob(self, state: Any, action: int) -> float:
        return 1.0 / self.num_actions

    def sample(self, state: Any, rng: np.random.Generator) -> int:
        return int(rng.integers(self.num_actions))


@dataclass
class GibbsPolicy:
    """
    Softmax over linear scores dot(u, phi_{s,a}).

    ``feature_fn(state, action)`` produces phi_{s,a}; callers that already hold the
    action features may pass them as ``phis`` to skip re-encoding.
    """

    u: np.ndarray
    action_set: Tuple[int, ...]
    feature_fn: FeatureFn

    def action_features(self, state: Any) -> Tuple[SparseFeatures, ...]:
        return tuple(self.feature_fn(state, a) for a in self.action_set)

    def probs(self, state: Any, phis: Optional[Sequence[SparseFeatures]] = None) -> np.ndarray:
        return gibbs_probs(self, state, phis)

    def score(self, state: Any, action: int, phis: Optional[Sequence[SparseFeatures]] = None,
              probs: Optional[np.ndarray] = None) -> SparseVector:
        return gibbs_score(self, state, action, phis, probs)

    def sample(self, state: Any, rng: np.random.Generator) -> int:
        return self.action_set[sample_from(self.probs(state), rng)]


def gibbs_probs(policy: GibbsPolicy, state: Any,
                phis: Optional[Sequence[SparseFeatures]] = None) -> np.ndarray:
    """pi(.|s) for a Gibbs policy."""
    if phis is None:
        phis = policy.action_features(state)
    return softmax(action_values(policy.u, phis))


def gibbs_score(policy: GibbsPolicy, state: Any, action: int,
                phis: Optional[Sequence[SparseFeatures]] = None,
                probs: Optional[np.ndarray] = None) -> SparseVector:
    """
    psi(s,a) = phi_{s,a} - sum_b pi(b|s) phi_{s,b}, over the union of active indices.
    """
    if phis is None:
        phis = policy.action_features(state)
    if probs is None:
        probs = softmax(action_values(policy.u, phis))
    try:
        chosen = policy.action_set.index(action)
    except ValueError:
        raise ConfigurationError(f"action {action} not in action set {policy.action_set}")

    indices = np.concatenate([phi.active_indices for phi in phis])
    values = np.concatenate([
        np.full(len(phi), (1.0 if b == chosen else 0.0) - probs[b])
        for b, phi in enumerate(phis)
    ])
    return SparseVector.from_terms(indices, values, phis[0].dimension)


@dataclass
class SoftmaxTarget:
    """
    Boltzmann target over action values with temperature tau.

    ``q_fn`` maps the tuple of per-action features to action values; ``action_features``
    maps a raw state to that tuple and is only needed to act from raw states.
    """

    tau: float
    q_fn: Optional[QFn] = field(default=None)
    action_features: Optional[ActionFeatureFn] = field(default=None)

    def probs_from_values(self, q: np.ndarray) -> np.ndarray:
        if self.tau <= 0.0:
            raise ConfigurationError(f"temperature must be positive, got {self.tau}")
        q = np.asarray(q, dtype=np.float64)
        return softmax((q - np.max(q)) / self.tau)

    def probs_of(self, phis: Sequence[SparseFeatures]) -> np.ndarray:
        return self.probs_from_values(self.q_fn(phis))

    def probs(self, state: Any) -> np.ndarray:
        return softmax_target_probs(self, state)

    def sample(self, state: Any, rng: np.random.Generator) -> int:
        return sample_from(self.probs(state), rng)


def softmax_target_probs(target: SoftmaxTarget, state: Any) -> np.ndarray:
    """softmax(Q(s,.)/tau)."""
    return target.probs_of(_state_features(target, state))


@dataclass
class GreedyTarget:
    """Point mass on argmax Q(s,.), ties broken toward the lowest action id."""

    q_fn: Optional[QFn] = field(default=None)
    action_features: Optional[ActionFeatureFn] = field(default=None)

    def probs_from_values(self, q: np.ndarray) -> np.ndarray:
        probs = np.zeros(len(q))
        probs[int(np.argmax(q))] = 1.0
        return probs

    def probs_of(self, phis: Sequence[SparseFeatures]) -> np.ndarray:
        return self.probs_from_values(self.q_fn(phis))

    def probs(self, state: Any) -> np.ndarray:
        return self.probs_of(_state_features(self, state))

    def sample(self, state: Any, rng: np.random.Generator) -> int:
        return greedy_action(self, state)


def greedy_action(target: GreedyTarget, state: Any) -> int:
    # np.argmax returns the first maximal entry.
    return int(np.argmax(target.q_fn(_state_features(target, state))))


def _state_features(target: Any, state: Any) -> Tuple[SparseFeatures, ...]:
    if target.action_features is None:
        raise ConfigurationError("target needs action_features to act from raw states")
    return target.action_features(state)


class LinearActionValues:
    """q_fn for linear action values: dot(weights, phi) for each action's features."""

    def __init__(self, weights: np.ndarray):
        self.weights = weights

    def __call__(self, phis: Sequence[SparseFeatures]) -> np.ndarray:
        return action_values(self.weights, phis)
