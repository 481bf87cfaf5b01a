"""
GTD(lambda) off-policy linear state-value learner (the critic of Off-PAC).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError, ensure_finite
from .features import EligibilityTrace, SparseFeatures, sparse_dot


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Transition:
    """
    One behavior-policy sample.

    ``phi_s`` and ``phi_sp`` optionally carry the state-action features of every
    action at s and s'; the actor and the action-value baselines need them.
    """

    x_s: SparseFeatures
    action: int
    b_prob: float
    reward: float
    x_sp: SparseFeatures
    gamma_s: float
    gamma_sp: float
    phi_s: Optional[Tuple[SparseFeatures, ...]] = None
    phi_sp: Optional[Tuple[SparseFeatures, ...]] = None

    def __post_init__(self):
        if not 0.0 < self.b_prob <= 1.0:
            raise ConfigurationError(f"b_prob must lie in (0, 1], got {self.b_prob}")
        if not (0.0 <= self.gamma_s <= 1.0 and 0.0 <= self.gamma_sp <= 1.0):
            raise ConfigurationError("termination gammas must lie in [0, 1]")


@dataclass
class CriticState:
    v: np.ndarray
    w: np.ndarray
    e_v: EligibilityTrace
    dimension: int

    @classmethod
    def zeros(cls, dimension: int) -> "CriticState":
        return cls(np.zeros(dimension), np.zeros(dimension), EligibilityTrace(dimension), dimension)


def td_error(v: np.ndarray, t: Transition) -> float:
    """delta = r + gamma(s') v.x_s' - v.x_s"""
    return t.reward + t.gamma_sp * sparse_dot(t.x_sp, v) - sparse_dot(t.x_s, v)


def critic_step(c: CriticState, t: Transition, rho: float, lam: float,
                alpha_v: float, alpha_w: float, delta: Optional[float] = None) -> float:
    """
    Apply the three GTD(lambda) assignments in place and return delta.

    delta is taken from the pre-update v unless supplied by the caller. Raises
    DivergenceError when a touched weight leaves the finite range.
    """
    if delta is None:
        delta = td_error(c.v, t)

    c.e_v.accumulate(t.gamma_s * lam, t.x_s, rho)

    we = c.e_v.dot(c.w)
    wx = sparse_dot(t.x_s, c.w)

    v_touched = c.e_v.add_combination(c.v, alpha_v, delta, -(t.gamma_sp * (1.0 - lam) * we), t.x_s)
    w_touched = c.e_v.add_combination(c.w, alpha_w, delta, -wx, t.x_s)

    ensure_finite("v", c.v, v_touched)
    ensure_finite("w", c.w, w_touched)
    return delta


def reset_traces(c: CriticState) -> None:
    c.e_v.reset()
