"""
Off-PAC actor update and the composed agent (behavior sample -> critic -> actor).
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from .errors import ConfigurationError, ensure_finite
from .features import EligibilityTrace, SparseVector
from .gtd_critic import CriticState, Transition, critic_step, reset_traces, td_error
from .policies import GibbsPolicy, gibbs_probs, gibbs_score, importance_ratio


logger = logging.getLogger(__name__)


@dataclass
class ActorState:
    u: np.ndarray
    e_u: EligibilityTrace

    @classmethod
    def zeros(cls, dimension: int) -> "ActorState":
        return cls(np.zeros(dimension), EligibilityTrace(dimension))


def actor_step(a: ActorState, psi: SparseVector, rho: float, delta: float,
               gamma_s: float, lam: float, alpha_u: float) -> None:
    """e_u <- rho (psi + gamma(s) lambda e_u);  u <- u + alpha_u delta e_u"""
    a.e_u.accumulate(gamma_s * lam, psi, rho)
    a.e_u.add_to(a.u, alpha_u * delta)
    ensure_finite("u", a.u, a.e_u.support)


@dataclass(frozen=True)
class OffPacHyperParams:
    """Effective (already divided) step sizes and trace decay."""

    alpha_v: float
    alpha_w: float
    alpha_u: float
    lam: float

    def validate(self) -> None:
        if min(self.alpha_v, self.alpha_w, self.alpha_u) < 0.0:
            raise ConfigurationError("step sizes must be non-negative")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class StepInfo:
    delta: float
    rho: float


class OffPacAgent:
    """Gibbs actor over state-action features plus a GTD(lambda) critic over state features."""

    learns = True

    def __init__(self, encoder: Any, num_actions: int, hyper: OffPacHyperParams):
        hyper.validate()
        self.encoder = encoder
        self.num_actions = num_actions
        self.hyper = hyper
        self.actor = ActorState.zeros(encoder.dimension)
        self.critic = CriticState.zeros(encoder.state_dimension)
        self.policy = GibbsPolicy(self.actor.u, tuple(range(num_actions)), encoder.encode_state_action)

    def step(self, t: Transition) -> StepInfo:
        return agent_step(self, t)

    def episode_reset(self) -> None:
        episode_reset(self)

    def evaluation_policy(self) -> GibbsPolicy:
        """Frozen copy of the current target policy."""
        return GibbsPolicy(np.copy(self.actor.u), self.policy.action_set, self.encoder.encode_state_action)

    def weights(self) -> Dict[str, np.ndarray]:
        return {'u': self.actor.u, 'v': self.critic.v, 'w': self.critic.w}

    def traces(self) -> Dict[str, EligibilityTrace]:
        return {'e_u': self.actor.e_u, 'e_v': self.critic.e_v}


def agent_step(ag: OffPacAgent, t: Transition) -> StepInfo:
    """One Off-PAC step: delta and rho from pre-update weights, then critic, then actor."""
    if t.phi_s is None:
        raise ConfigurationError("Off-PAC transitions must carry the state-action features phi_s")
    hp = ag.hyper

    delta = td_error(ag.critic.v, t)
    probs = gibbs_probs(ag.policy, None, t.phi_s)
    rho = importance_ratio(probs[t.action], t.b_prob)
    psi = gibbs_score(ag.policy, None, t.action, t.phi_s, probs)

    critic_step(ag.critic, t, rho, hp.lam, hp.alpha_v, hp.alpha_w, delta)
    actor_step(ag.actor, psi, rho, delta, t.gamma_s, hp.lam, hp.alpha_u)
    return StepInfo(delta, rho)


def episode_reset(ag: OffPacAgent) -> None:
    reset_traces(ag.critic)
    ag.actor.e_u.reset()


def save_snapshot(path: str, **vectors: np.ndarray) -> None:
    """Store the nonzero entries of each named dense vector in one compressed archive."""
    arrays = {}
    for name, vec in vectors.items():
        nonzero = np.flatnonzero(vec)
        arrays[f"{name}__indices"] = nonzero
        arrays[f"{name}__values"] = vec[nonzero]
        arrays[f"{name}__dimension"] = np.array(vec.shape[0])
    np.savez_compressed(path, **arrays)
    logger.info(f"Saved weight snapshot with {len(vectors)} vectors to {path}")


def load_snapshot(path: str) -> Dict[str, np.ndarray]:
    with np.load(path) as archive:
        names = sorted({key.rsplit('__', 1)[0] for key in archive.files})
        restored = {}
        for name in names:
            dense = np.zeros(int(archive[f"{name}__dimension"]))
            dense[archive[f"{name}__indices"]] = archive[f"{name}__values"]
            restored[name] = dense
    return restored
