"""
Benchmark environments (mountain car, pendulum, continuous grid world) and the
small tabular MDPs used by the oracle.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError
from .policies import sample_from


logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 5000


@dataclass(frozen=True)
class StepResult:
    """Outcome of one environment step; ``truncated`` marks the step cap."""

    state: np.ndarray
    reward: float
    terminal: bool
    truncated: bool

    @property
    def done(self) -> bool:
        return self.terminal or self.truncated


# ---------------------------------------------------------------- mountain car

MC_POSITION_BOUNDS = (-1.2, 0.6)
MC_VELOCITY_BOUNDS = (-0.07, 0.07)
MC_THROTTLES = (-1, 0, 1)


@dataclass(frozen=True)
class MountainCarState:
    position: float
    velocity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.position, self.velocity])


def mc_step(s: MountainCarState, throttle: int) -> Tuple[MountainCarState, float, bool]:
    """Classical mountain-car dynamics; returns (s', -1, reached the top)."""
    if throttle not in MC_THROTTLES:
        raise ConfigurationError(f"mountain-car throttle must be one of {MC_THROTTLES}, got {throttle}")
    velocity = s.velocity + 0.001 * throttle - 0.0025 * math.cos(3.0 * s.position)
    velocity = min(max(velocity, MC_VELOCITY_BOUNDS[0]), MC_VELOCITY_BOUNDS[1])
    position = s.position + velocity
    position = min(max(position, MC_POSITION_BOUNDS[0]), MC_POSITION_BOUNDS[1])
    if position <= MC_POSITION_BOUNDS[0] and velocity < 0.0:
        velocity = 0.0
    return MountainCarState(position, velocity), -1.0, position >= MC_POSITION_BOUNDS[1]


class MountainCar:
    name = 'mountain_car'
    num_actions = 3
    state_lows = (MC_POSITION_BOUNDS[0], MC_VELOCITY_BOUNDS[0])
    state_highs = (MC_POSITION_BOUNDS[1], MC_VELOCITY_BOUNDS[1])

    def __init__(self, max_steps: int = DEFAULT_MAX_STEPS):
        self.max_steps = max_steps
        self.state = MountainCarState(-0.5, 0.0)
        self.steps = 0

    def reset(self) -> np.ndarray:
        self.state = MountainCarState(-0.5, 0.0)
        self.steps = 0
        return self.state.as_array()

    def step(self, action: int) -> StepResult:
        self.state, reward, terminal = mc_step(self.state, MC_THROTTLES[action])
        self.steps += 1
        return StepResult(self.state.as_array(), reward, terminal,
                          not terminal and self.steps >= self.max_steps)


# -------------------------------------------------------------------- pendulum

PENDULUM_TORQUES = (-2.0, 0.0, 2.0)


@dataclass(frozen=True)
class PendulumParams:
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.8
    friction: float = 0.01
    dt: float = 0.01
    max_velocity: float = 78.54


@dataclass(frozen=True)
class PendulumState:
    """Angle measured from upright, wrapped to (-pi, pi]."""

    angle: float
    angular_velocity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.angle, self.angular_velocity])


def wrap_angle(theta: float) -> float:
    return math.pi - ((math.pi - theta) % (2.0 * math.pi))


def pendulum_step(s: PendulumState, torque: float,
                  params: PendulumParams = PendulumParams()) -> Tuple[PendulumState, float, bool]:
    """
    Semi-implicit Euler step of the damped pendulum; reward is cos(angle from upright).

    The pendulum never terminates on its own, only through the step cap.
    """
    if torque not in PENDULUM_TORQUES:
        raise ConfigurationError(f"pendulum torque must be one of {PENDULUM_TORQUES}, got {torque}")
    p = params
    accel = (-p.friction * s.angular_velocity
             + p.mass * p.gravity * p.length * math.sin(s.angle)
             + torque) / (p.mass * p.length ** 2)
    velocity = s.angular_velocity + p.dt * accel
    velocity = min(max(velocity, -p.max_velocity), p.max_velocity)
    angle = wrap_angle(s.angle + p.dt * velocity)
    return PendulumState(angle, velocity), math.cos(angle), False


class Pendulum:
    name = 'pendulum'
    num_actions = 3

    def __init__(self, params: PendulumParams = PendulumParams(), max_steps: int = DEFAULT_MAX_STEPS):
        self.params = params
        self.max_steps = max_steps
        self.state_lows = (-math.pi, -params.max_velocity)
        self.state_highs = (math.pi, params.max_velocity)
        self.state = PendulumState(math.pi / 2.0, 0.0)
        self.steps = 0

    def reset(self) -> np.ndarray:
        self.state = PendulumState(math.pi / 2.0, 0.0)
        self.steps = 0
        return self.state.as_array()

    def step(self, action: int) -> StepResult:
        self.state, reward, _ = pendulum_step(self.state, PENDULUM_TORQUES[action], self.params)
        self.steps += 1
        return StepResult(self.state.as_array(), reward, False, self.steps >= self.max_steps)


# ---------------------------------------------------------- continuous grid world

GRID_MOVES = ((0.0, 0.0), (-0.05, 0.0), (0.05, 0.0), (0.0, -0.05), (0.0, 0.05))
GRID_NOISE = 0.025
GRID_START = (0.2, 0.4)
GRID_GOAL = (1.0, 1.0)
GRID_GOAL_RADIUS = 0.1


@dataclass(frozen=True)
class GridWorldState:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


def gaussian(p: float, mu: float, sigma: float) -> float:
    return math.exp(-(p - mu) ** 2 / (2.0 * sigma ** 2)) / (sigma * math.sqrt(2.0 * math.pi))


def gridworld_reward(x: float, y: float) -> float:
    """Reward for arriving at (x, y): -1 minus the three Gaussian ridges."""
    return -1.0 - 2.0 * (gaussian(x, 0.3, 0.1) * gaussian(y, 0.6, 0.03)
                         + gaussian(x, 0.4, 0.03) * gaussian(y, 0.5, 0.1)
                         + gaussian(x, 0.8, 0.03) * gaussian(y, 0.9, 0.1))


def gridworld_reached_goal(x: float, y: float) -> bool:
    return abs(GRID_GOAL[0] - x) + abs(GRID_GOAL[1] - y) < GRID_GOAL_RADIUS


def gridworld_step(s: GridWorldState, move: Tuple[float, float],
                   rng: np.random.Generator) -> Tuple[GridWorldState, float, bool]:
    if move not in GRID_MOVES:
        raise ConfigurationError(f"grid-world move must be one of {GRID_MOVES}, got {move}")
    noise = rng.uniform(-GRID_NOISE, GRID_NOISE, size=2)
    x = min(max(s.x + move[0] + noise[0], 0.0), 1.0)
    y = min(max(s.y + move[1] + noise[1], 0.0), 1.0)
    return GridWorldState(x, y), gridworld_reward(x, y), gridworld_reached_goal(x, y)


class ContinuousGridWorld:
    name = 'gridworld'
    num_actions = len(GRID_MOVES)
    state_lows = (0.0, 0.0)
    state_highs = (1.0, 1.0)

    def __init__(self, rng: np.random.Generator, max_steps: int = DEFAULT_MAX_STEPS):
        self.rng = rng
        self.max_steps = max_steps
        self.state = GridWorldState(*GRID_START)
        self.steps = 0

    def reset(self) -> np.ndarray:
        self.state = GridWorldState(*GRID_START)
        self.steps = 0
        return self.state.as_array()

    def step(self, action: int) -> StepResult:
        self.state, reward, terminal = gridworld_step(self.state, GRID_MOVES[action], self.rng)
        self.steps += 1
        return StepResult(self.state.as_array(), reward, terminal,
                          not terminal and self.steps >= self.max_steps)


ENV_NAMES = ('mountain_car', 'pendulum', 'gridworld')


def make_env(name: str, rng: np.random.Generator, max_steps: int = DEFAULT_MAX_STEPS,
             pendulum_params: Optional[PendulumParams] = None):
    """Build a fresh environment instance; ``rng`` feeds any environment noise."""
    if name == 'mountain_car':
        return MountainCar(max_steps)
    if name == 'pendulum':
        return Pendulum(pendulum_params or PendulumParams(), max_steps)
    if name == 'gridworld':
        return ContinuousGridWorld(rng, max_steps)
    raise ConfigurationError(f"unknown environment '{name}', expected one of {ENV_NAMES}")


# ------------------------------------------------------------------ tabular MDPs

@dataclass(frozen=True, eq=False)
class TabularMDP:
    """
    Finite MDP with termination through per-state gamma.

    P and R have shape (S, A, S); gamma has shape (S,); behavior has shape (S, A).
    """

    num_states: int
    num_actions: int
    P: np.ndarray
    R: np.ndarray
    gamma: np.ndarray
    behavior: np.ndarray

    def __post_init__(self):
        shape = (self.num_states, self.num_actions, self.num_states)
        if self.P.shape != shape or self.R.shape != shape:
            raise ConfigurationError(f"P and R must have shape {shape}")
        if self.gamma.shape != (self.num_states,) or self.behavior.shape != shape[:2]:
            raise ConfigurationError("gamma must be (S,) and behavior (S, A)")
        if np.any(np.abs(self.P.sum(axis=2) - 1.0) > 1e-12) or np.any(self.P < 0.0):
            raise ConfigurationError("every P(.|s,a) must be a distribution")
        if np.any(self.behavior <= 0.0) or np.any(np.abs(self.behavior.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigurationError("behavior must be a strictly positive distribution per state")
        if np.any(self.gamma < 0.0) or np.any(self.gamma > 1.0):
            raise ConfigurationError("gamma must lie in [0, 1]")


def tabular_step(m: TabularMDP, s: int, a: int, rng: np.random.Generator) -> Tuple[int, float]:
    if not (0 <= s < m.num_states and 0 <= a < m.num_actions):
        raise ConfigurationError(f"invalid state/action ({s}, {a})")
    sp = sample_from(m.P[s, a], rng)
    return sp, float(m.R[s, a, sp])


def _uniform_behavior(num_states: int, num_actions: int) -> np.ndarray:
    return np.full((num_states, num_actions), 1.0 / num_actions)


def two_state_chain(gamma: float = 0.5, reward: float = 0.05) -> TabularMDP:
    """Action 0 stays, action 1 switches; ``reward`` for arriving in state 1."""
    P = np.zeros((2, 2, 2))
    for s in range(2):
        P[s, 0, s] = 1.0
        P[s, 1, 1 - s] = 1.0
    R = np.zeros((2, 2, 2))
    R[:, :, 1] = reward
    return TabularMDP(2, 2, P, R, np.full(2, gamma), _uniform_behavior(2, 2))


def three_state_ring(gamma: float = 0.9, slip: float = 0.1) -> TabularMDP:
    """Action 0 moves clockwise, action 1 counter-clockwise; each stays put with prob ``slip``."""
    P = np.zeros((3, 2, 3))
    for s in range(3):
        P[s, 0, (s + 1) % 3] += 1.0 - slip
        P[s, 1, (s - 1) % 3] += 1.0 - slip
        P[s, :, s] += slip
    R = np.zeros((3, 2, 3))
    R[:, :, :] = np.array([0.0, 0.5, 1.0])
    return TabularMDP(3, 2, P, R, np.full(3, gamma), _uniform_behavior(3, 2))


def random_mdp(num_states: int = 4, num_actions: int = 2, gamma: float = 0.8,
               seed: int = 0) -> TabularMDP:
    """Dense random MDP with Dirichlet transitions and rewards uniform in [-1, 1]."""
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    R = rng.uniform(-1.0, 1.0, size=(num_states, num_actions, num_states))
    return TabularMDP(num_states, num_actions, P, R, np.full(num_states, gamma),
                      _uniform_behavior(num_states, num_actions))


def oracle_mdps():
    """The in-repo tabular MDPs."""
    return {'two_state_chain': two_state_chain(), 'three_state_ring': three_state_ring(),
            'random_mdp': random_mdp()}
