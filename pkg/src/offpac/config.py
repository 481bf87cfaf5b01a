"""
Experiment and sweep configuration.

Config files are flat ``key=value`` text read with python-dotenv; a sweep file uses
the same keys and may give any of them a comma-separated list of values.
"""

import hashlib
import itertools
import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, List, Optional, Tuple

from dotenv import dotenv_values

from .envs import DEFAULT_MAX_STEPS, ENV_NAMES, PendulumParams
from .errors import ConfigurationError
from .features import TileCoderConfig


logger = logging.getLogger(__name__)

ALGORITHMS = ('behavior', 'q_lambda', 'greedy_gq', 'softmax_gq', 'offpac')

DEFAULT_EPISODES = {'mountain_car': 5000, 'gridworld': 5000, 'pendulum': 200}

# Config-file keys that differ from the field names.
FILE_KEY_ALIASES = {'lambda': 'lam'}
FIELD_FILE_KEYS = {v: k for k, v in FILE_KEY_ALIASES.items()}

# Fields that do not identify a sweep cell.
_RUN_ONLY_FIELDS = ('seed', 'num_runs')


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One sweep cell. Step sizes are raw values; the learners receive them divided by
    the number of active features (tilings plus bias).
    """

    env: str = 'mountain_car'
    algorithm: str = 'offpac'
    alpha_v: float = 0.05
    alpha_w: float = 0.0001
    alpha_u: float = 1.0
    tau: float = 1.0
    lam: float = 0.0
    gamma: float = 0.99
    num_episodes: Optional[int] = None
    num_runs: int = 30
    eval_points: int = 20
    eval_episodes: int = 5
    seed: int = 0
    max_episode_steps: int = DEFAULT_MAX_STEPS
    num_tilings: int = 10
    tiles_per_dim: int = 10
    hash_size: int = 10 ** 6
    include_bias: bool = True
    pendulum_mass: float = PendulumParams.mass
    pendulum_length: float = PendulumParams.length
    pendulum_gravity: float = PendulumParams.gravity
    pendulum_friction: float = PendulumParams.friction
    pendulum_dt: float = PendulumParams.dt

    @property
    def episodes(self) -> int:
        """Training episodes, falling back to the per-environment default."""
        if self.num_episodes is not None:
            return self.num_episodes
        return DEFAULT_EPISODES.get(self.env, 5000)

    @property
    def active_features(self) -> int:
        return self.num_tilings + (1 if self.include_bias else 0)

    def effective_step_sizes(self) -> Tuple[float, float, float]:
        """(alpha_v, alpha_w, alpha_u) divided by the number of active features."""
        n = self.active_features
        return self.alpha_v / n, self.alpha_w / n, self.alpha_u / n

    def tile_coder_config(self, state_lows, state_highs) -> TileCoderConfig:
        return TileCoderConfig(num_tilings=self.num_tilings, tiles_per_dim=self.tiles_per_dim,
                               hash_size=self.hash_size, state_lows=tuple(state_lows),
                               state_highs=tuple(state_highs), include_bias=self.include_bias)

    def pendulum_params(self) -> PendulumParams:
        return PendulumParams(mass=self.pendulum_mass, length=self.pendulum_length,
                              gravity=self.pendulum_gravity, friction=self.pendulum_friction,
                              dt=self.pendulum_dt)

    def validate(self) -> None:
        if self.env not in ENV_NAMES:
            raise ConfigurationError(f"unknown env '{self.env}', expected one of {ENV_NAMES}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm '{self.algorithm}', expected one of {ALGORITHMS}")
        if min(self.alpha_v, self.alpha_w, self.alpha_u) < 0.0:
            raise ConfigurationError("step sizes must be non-negative")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.algorithm == 'softmax_gq' and self.tau <= 0.0:
            raise ConfigurationError(f"softmax temperature must be positive, got {self.tau}")
        for name in ('num_runs', 'eval_points', 'eval_episodes', 'max_episode_steps'):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.episodes < self.eval_points:
            raise ConfigurationError("num_episodes must be at least eval_points")
        self.tile_coder_config((0.0,), (1.0,)).validate()

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """New validated config with the given (non-None) fields replaced."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        cfg = replace(self, **changes)
        cfg.validate()
        return cfg

    def config_id(self) -> str:
        """Stable identifier of the cell (everything except seed and run count)."""
        params = {k: v for k, v in asdict(self).items() if k not in _RUN_ONLY_FIELDS}
        params['num_episodes'] = self.episodes
        blob = json.dumps(params, sort_keys=True)
        return hashlib.sha1(blob.encode('utf-8')).hexdigest()[:12]

    def to_file_dict(self) -> Dict[str, str]:
        return {FIELD_FILE_KEYS.get(k, k): str(v) for k, v in asdict(self).items() if v is not None}


_FIELD_TYPES = {
    'env': str, 'algorithm': str, 'num_episodes': int, 'num_runs': int, 'eval_points': int,
    'eval_episodes': int, 'seed': int, 'max_episode_steps': int, 'num_tilings': int,
    'tiles_per_dim': int, 'hash_size': int, 'include_bias': bool,
}


def _coerce(name: str, raw: str) -> Any:
    kind = _FIELD_TYPES.get(name, float)
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(text)
        if kind is int:
            return int(float(text)) if 'e' in text.lower() else int(text)
        return kind(text)
    except ValueError:
        raise ConfigurationError(f"invalid value for '{name}': {raw!r}")


def _field_name(key: str) -> str:
    name = FILE_KEY_ALIASES.get(key, key)
    if name not in {f.name for f in fields(ExperimentConfig)}:
        raise ConfigurationError(f"unknown config key '{key}'")
    return name


def _read_pairs(path: str) -> Dict[str, str]:
    values = dotenv_values(path)
    if not values:
        logger.warning(f"Config file {path} is empty or missing")
    return {k: (v if v is not None else '') for k, v in values.items()}


def load_config(path: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Read a key=value experiment file on top of ``base`` (defaults when None)."""
    overrides = {}
    for key, raw in _read_pairs(path).items():
        name = _field_name(key)
        overrides[name] = _coerce(name, raw)
    cfg = replace(base or ExperimentConfig(), **overrides)
    cfg.validate()
    logger.info(f"Loaded config {cfg.config_id()} from {path}")
    return cfg


@dataclass(frozen=True)
class SweepSpec:
    """A base config plus, per swept field, the values to combine."""

    base: ExperimentConfig
    grid: Tuple[Tuple[str, Tuple[Any, ...]], ...] = ()

    def cells(self) -> List[ExperimentConfig]:
        """Cartesian product of the grid applied to the base config."""
        if not self.grid:
            return [self.base]
        names = [name for name, _ in self.grid]
        cells = []
        for combo in itertools.product(*(values for _, values in self.grid)):
            cells.append(self.base.with_overrides(**dict(zip(names, combo))))
        return cells


def load_sweep(path: str) -> SweepSpec:
    """Read a sweep file; keys holding comma-separated lists become grid axes."""
    scalars = {}
    grid = []
    for key, raw in _read_pairs(path).items():
        name = _field_name(key)
        parts = [p for p in raw.split(',') if p.strip()]
        if len(parts) > 1:
            grid.append((name, tuple(_coerce(name, p) for p in parts)))
        else:
            scalars[name] = _coerce(name, raw)
    base = replace(ExperimentConfig(), **scalars)
    base.validate()
    spec = SweepSpec(base, tuple(grid))
    logger.info(f"Loaded sweep from {path}: {len(spec.cells())} cells")
    return spec
