"""
Comparison learners over linear action values Q(s,a) = dot(v, phi_{s,a}):
Watkins's Q(lambda), and GQ(lambda) with a greedy or softmax target policy.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ensure_finite
from .features import EligibilityTrace, SparseFeatures, SparseVector, sparse_dot
from .gtd_critic import Transition
from .policies import (GreedyTarget, LinearActionValues, SoftmaxTarget, action_values,
                       importance_ratio)


logger = logging.getLogger(__name__)

Target = Union[GreedyTarget, SoftmaxTarget]


@dataclass
class QLambdaState:
    v: np.ndarray
    e: EligibilityTrace
    lam: float
    alpha_v: float

    @classmethod
    def zeros(cls, dimension: int, lam: float, alpha_v: float) -> "QLambdaState":
        return cls(np.zeros(dimension), EligibilityTrace(dimension), lam, alpha_v)


@dataclass
class GQState:
    v: np.ndarray
    w: np.ndarray
    e: EligibilityTrace
    target: Target
    lam: float
    alpha_v: float
    alpha_w: float

    @classmethod
    def zeros(cls, dimension: int, target: Target, lam: float,
              alpha_v: float, alpha_w: float) -> "GQState":
        return cls(np.zeros(dimension), np.zeros(dimension), EligibilityTrace(dimension),
                   target, lam, alpha_v, alpha_w)


def _require_phi_s(t: Transition) -> Sequence[SparseFeatures]:
    if t.phi_s is None:
        raise ConfigurationError("action-value learners need phi_s for every action at s")
    return t.phi_s


def q_lambda_step(st: QLambdaState, t: Transition, phi_sa: SparseFeatures,
                  phi_sp_all: Sequence[SparseFeatures]) -> float:
    """
    Watkins's Q(lambda): the trace decays only when the behavior action was greedy.

    Returns the TD error.
    """
    q_s = action_values(st.v, _require_phi_s(t))
    was_greedy = t.action == int(np.argmax(q_s))
    q_sp = action_values(st.v, phi_sp_all)
    delta = t.reward + t.gamma_sp * float(np.max(q_sp)) - sparse_dot(phi_sa, st.v)

    decay = t.gamma_s * st.lam if was_greedy else 0.0
    st.e.accumulate(decay, phi_sa)
    st.e.add_to(st.v, st.alpha_v * delta)
    ensure_finite("v", st.v, st.e.support)
    return delta


def _target_probs(st: GQState, phis: Sequence[SparseFeatures]) -> np.ndarray:
    # A target carrying its own q_fn is a fixed policy; otherwise it follows the learned values.
    if st.target.q_fn is not None:
        return st.target.probs_of(phis)
    return st.target.probs_from_values(action_values(st.v, phis))


def expected_features(probs: np.ndarray, phis: Sequence[SparseFeatures]) -> SparseVector:
    """sum_a pi(a) phi_a"""
    indices = np.concatenate([phi.active_indices for phi in phis])
    values = np.concatenate([np.full(len(phi), p) for p, phi in zip(probs, phis)])
    return SparseVector.from_terms(indices, values, phis[0].dimension)


def gq_step(st: GQState, t: Transition, phi_sa: SparseFeatures,
            phi_sp_all: Sequence[SparseFeatures]) -> float:
    """GQ(lambda) with importance-weighted traces; returns the TD error."""
    phibar = expected_features(_target_probs(st, phi_sp_all), phi_sp_all)
    delta = t.reward + t.gamma_sp * phibar.dot(st.v) - sparse_dot(phi_sa, st.v)
    rho = importance_ratio(_target_probs(st, _require_phi_s(t))[t.action], t.b_prob)

    st.e.accumulate(t.gamma_s * st.lam * rho, phi_sa)

    we = st.e.dot(st.w)
    wx = sparse_dot(phi_sa, st.w)

    v_touched = st.e.add_combination(st.v, st.alpha_v, delta, -(t.gamma_sp * (1.0 - st.lam) * we), phibar)
    w_touched = st.e.add_combination(st.w, st.alpha_w, delta, -wx, phi_sa)

    ensure_finite("v", st.v, v_touched)
    ensure_finite("w", st.w, w_touched)
    return delta


class QLambdaAgent:
    """Q(lambda) learner evaluated greedily."""

    learns = True

    def __init__(self, encoder: Any, num_actions: int, alpha_v: float, lam: float):
        self.encoder = encoder
        self.num_actions = num_actions
        self.state = QLambdaState.zeros(encoder.dimension, lam, alpha_v)

    def step(self, t: Transition) -> float:
        return q_lambda_step(self.state, t, t.phi_s[t.action], t.phi_sp)

    def episode_reset(self) -> None:
        self.state.e.reset()

    def evaluation_policy(self) -> GreedyTarget:
        return GreedyTarget(LinearActionValues(np.copy(self.state.v)),
                            partial(self.encoder.encode_all_actions, num_actions=self.num_actions))

    def weights(self) -> Dict[str, np.ndarray]:
        return {'v': self.state.v}

    def traces(self) -> Dict[str, EligibilityTrace]:
        return {'e': self.state.e}


class GQAgent:
    """Greedy-GQ (tau is None) or Softmax-GQ learner."""

    learns = True

    def __init__(self, encoder: Any, num_actions: int, alpha_v: float, alpha_w: float,
                 lam: float, tau: Optional[float] = None):
        self.encoder = encoder
        self.num_actions = num_actions
        self.tau = tau
        target = GreedyTarget() if tau is None else SoftmaxTarget(tau)
        self.state = GQState.zeros(encoder.dimension, target, lam, alpha_v, alpha_w)

    def step(self, t: Transition) -> float:
        return gq_step(self.state, t, t.phi_s[t.action], t.phi_sp)

    def episode_reset(self) -> None:
        self.state.e.reset()

    def evaluation_policy(self) -> Target:
        q_fn = LinearActionValues(np.copy(self.state.v))
        features = partial(self.encoder.encode_all_actions, num_actions=self.num_actions)
        if self.tau is None:
            return GreedyTarget(q_fn, features)
        return SoftmaxTarget(self.tau, q_fn, features)

    def weights(self) -> Dict[str, np.ndarray]:
        return {'v': self.state.v, 'w': self.state.w}

    def traces(self) -> Dict[str, EligibilityTrace]:
        return {'e': self.state.e}
