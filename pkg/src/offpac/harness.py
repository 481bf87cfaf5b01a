"""
Experiment harness: seeded training runs with frozen-policy evaluation checkpoints,
parameter sweeps over a process pool, CSV persistence, aggregation, best-cell
selection and report generation.
"""

import csv
import hashlib
import logging
import os
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .baselines import GQAgent, QLambdaAgent
from .config import ExperimentConfig, SweepSpec
from .envs import make_env
from .errors import ConfigurationError, DivergenceError, OffPacError
from .features import TileCoder
from .gtd_critic import Transition
from .offpac_actor import OffPacAgent, OffPacHyperParams, save_snapshot
from .policies import UniformBehavior


logger = logging.getLogger(__name__)

RAW_COLUMNS = ['config_id', 'algorithm', 'env', 'alpha_v_raw', 'alpha_w_raw', 'alpha_u_raw',
               'tau', 'lambda', 'run', 'checkpoint', 'mean_return', 'stderr_return', 'diverged']
CELL_COLUMNS = ['config_id', 'algorithm', 'env', 'alpha_v_raw', 'alpha_w_raw', 'alpha_u_raw',
                'tau', 'lambda']
SUMMARY_COLUMNS = ['env', 'algorithm', 'criterion', 'alpha_w', 'alpha_u_tau', 'alpha_v', 'lambda',
                   'reward', 'stderr']
CRITERIA = ('final', 'overall')
FLOAT_FORMAT = '%.6f'

RAW_FILE = 'raw_results.csv'
FAILURES_FILE = 'failures.csv'
AGGREGATED_FILE = 'aggregated_results.csv'
CURVES_FILE = 'learning_curves.csv'
SUMMARY_FILE = 'summary.csv'
SNAPSHOT_DIR = 'weights'

# Best final-performance raw hyperparameters of the published benchmark comparison.
REPORTED_BEST_FINAL: Dict[Tuple[str, str], Dict[str, float]] = {
    ('mountain_car', 'behavior'): {},
    ('mountain_car', 'q_lambda'): {'alpha_v': 0.1, 'lam': 0.6},
    ('mountain_car', 'greedy_gq'): {'alpha_w': 0.0001, 'alpha_v': 0.1, 'lam': 0.4},
    ('mountain_car', 'softmax_gq'): {'alpha_w': 0.0005, 'tau': 0.1, 'alpha_v': 0.1, 'lam': 0.4},
    ('mountain_car', 'offpac'): {'alpha_w': 0.0001, 'alpha_u': 1.0, 'alpha_v': 0.05, 'lam': 0.0},
    ('pendulum', 'behavior'): {},
    ('pendulum', 'q_lambda'): {'alpha_v': 0.5, 'lam': 0.99},
    ('pendulum', 'greedy_gq'): {'alpha_w': 0.0, 'alpha_v': 0.5, 'lam': 0.4},
    ('pendulum', 'softmax_gq'): {'alpha_w': 0.0, 'tau': 0.1, 'alpha_v': 0.5, 'lam': 0.4},
    ('pendulum', 'offpac'): {'alpha_w': 0.005, 'alpha_u': 0.5, 'alpha_v': 0.5, 'lam': 0.0},
    ('gridworld', 'behavior'): {},
    ('gridworld', 'q_lambda'): {'alpha_v': 0.0001, 'lam': 0.0},
    ('gridworld', 'greedy_gq'): {'alpha_w': 0.05, 'alpha_v': 1.0, 'lam': 0.2},
    ('gridworld', 'softmax_gq'): {'alpha_w': 0.1, 'tau': 50.0, 'alpha_v': 0.5, 'lam': 0.6},
    ('gridworld', 'offpac'): {'alpha_w': 0.0, 'alpha_u': 0.001, 'alpha_v': 0.1, 'lam': 0.4},
}

REPORTED_FINAL_RETURN: Dict[Tuple[str, str], float] = {
    ('mountain_car', 'behavior'): -4822.0, ('mountain_car', 'q_lambda'): -143.0,
    ('mountain_car', 'greedy_gq'): -131.9, ('mountain_car', 'softmax_gq'): -133.4,
    ('mountain_car', 'offpac'): -108.6,
    ('pendulum', 'behavior'): -4582.0, ('pendulum', 'q_lambda'): 1802.0,
    ('pendulum', 'greedy_gq'): 1782.0, ('pendulum', 'softmax_gq'): 1789.0,
    ('pendulum', 'offpac'): 2521.0,
    ('gridworld', 'behavior'): -13814.0, ('gridworld', 'q_lambda'): -5138.0,
    ('gridworld', 'greedy_gq'): -5002.0, ('gridworld', 'softmax_gq'): -3332.0,
    ('gridworld', 'offpac'): -37.0,
}

# Best overall-performance (area under the learning curve) raw hyperparameters.
REPORTED_BEST_OVERALL: Dict[Tuple[str, str], Dict[str, float]] = {
    ('mountain_car', 'behavior'): {},
    ('mountain_car', 'q_lambda'): {'alpha_v': 0.1, 'lam': 0.0},
    ('mountain_car', 'greedy_gq'): {'alpha_w': 0.0001, 'alpha_v': 0.1, 'lam': 0.2},
    ('mountain_car', 'softmax_gq'): {'alpha_w': 0.0001, 'tau': 0.1, 'alpha_v': 0.05, 'lam': 0.2},
    ('mountain_car', 'offpac'): {'alpha_w': 0.001, 'alpha_u': 1.0, 'alpha_v': 0.5, 'lam': 0.0},
    ('pendulum', 'behavior'): {},
    ('pendulum', 'q_lambda'): {'alpha_v': 0.5, 'lam': 0.99},
    ('pendulum', 'greedy_gq'): {'alpha_w': 0.0001, 'alpha_v': 0.01, 'lam': 0.4},
    ('pendulum', 'softmax_gq'): {'alpha_w': 0.0001, 'tau': 0.05, 'alpha_v': 0.005, 'lam': 0.6},
    ('pendulum', 'offpac'): {'alpha_w': 0.0, 'alpha_u': 0.5, 'alpha_v': 0.5, 'lam': 0.0},
    ('gridworld', 'behavior'): {},
    ('gridworld', 'q_lambda'): {'alpha_v': 0.0001, 'lam': 0.0},
    ('gridworld', 'greedy_gq'): {'alpha_w': 0.0, 'alpha_v': 0.0001, 'lam': 0.0},
    ('gridworld', 'softmax_gq'): {'alpha_w': 0.1, 'tau': 50.0, 'alpha_v': 0.5, 'lam': 0.6},
    ('gridworld', 'offpac'): {'alpha_w': 0.0, 'alpha_u': 0.001, 'alpha_v': 0.005, 'lam': 0.6},
}

REPORTED_OVERALL_RETURN: Dict[Tuple[str, str], float] = {
    ('mountain_car', 'behavior'): -4880.0, ('mountain_car', 'q_lambda'): -442.0,
    ('mountain_car', 'greedy_gq'): -434.0, ('mountain_car', 'softmax_gq'): -470.0,
    ('mountain_car', 'offpac'): -356.0,
    ('pendulum', 'behavior'): -4580.0, ('pendulum', 'q_lambda'): 376.0,
    ('pendulum', 'greedy_gq'): 785.0, ('pendulum', 'softmax_gq'): 620.0,
    ('pendulum', 'offpac'): 1432.0,
    ('gridworld', 'behavior'): -14237.0, ('gridworld', 'q_lambda'): -5034.0,
    ('gridworld', 'greedy_gq'): -5034.0, ('gridworld', 'softmax_gq'): -4450.0,
    ('gridworld', 'offpac'): -1003.0,
}

REPORTED_PARAMS = {'final': REPORTED_BEST_FINAL, 'overall': REPORTED_BEST_OVERALL}
REPORTED_RETURNS = {'final': REPORTED_FINAL_RETURN, 'overall': REPORTED_OVERALL_RETURN}

LAMBDA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 0.99)
TAU_GRID = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0)
STEP_SIZE_GRID = (0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0)
# The correction step size also tries switching the correction off.
ALPHA_W_GRID = (0.0,) + STEP_SIZE_GRID

SWEEP_AXES: Dict[str, Tuple[str, ...]] = {
    'behavior': (),
    'q_lambda': ('alpha_v', 'lam'),
    'greedy_gq': ('alpha_w', 'alpha_v', 'lam'),
    'softmax_gq': ('alpha_w', 'tau', 'alpha_v', 'lam'),
    'offpac': ('alpha_w', 'alpha_u', 'alpha_v', 'lam'),
}
AXIS_VALUES: Dict[str, Tuple[float, ...]] = {
    'alpha_v': STEP_SIZE_GRID, 'alpha_u': STEP_SIZE_GRID, 'alpha_w': ALPHA_W_GRID,
    'tau': TAU_GRID, 'lam': LAMBDA_GRID,
}


def _criterion_table(tables: Dict[str, Dict], criterion: str) -> Dict:
    try:
        return tables[criterion]
    except KeyError:
        raise ConfigurationError(f"criterion must be one of {CRITERIA}, got '{criterion}'")


def reported_config(env: str, algorithm: str, base: Optional[ExperimentConfig] = None,
                    criterion: str = 'final') -> ExperimentConfig:
    """Config carrying the reported best hyperparameters for (env, algorithm) under ``criterion``."""
    try:
        params = _criterion_table(REPORTED_PARAMS, criterion)[(env, algorithm)]
    except KeyError:
        raise ConfigurationError(f"no reported hyperparameters for {env}/{algorithm}")
    return (base or ExperimentConfig()).with_overrides(env=env, algorithm=algorithm, **params)


def reported_return(env: str, algorithm: str, criterion: str = 'final') -> float:
    try:
        return _criterion_table(REPORTED_RETURNS, criterion)[(env, algorithm)]
    except KeyError:
        raise ConfigurationError(f"no reported return for {env}/{algorithm}")


def reported_grid(algorithm: str) -> Tuple[Tuple[str, Tuple[float, ...]], ...]:
    """Sweep axes of the published comparison for ``algorithm``, in axis order."""
    if algorithm not in SWEEP_AXES:
        raise ConfigurationError(f"unknown algorithm '{algorithm}'")
    return tuple((name, AXIS_VALUES[name]) for name in SWEEP_AXES[algorithm])


def reported_sweep(env: str, algorithm: str, base: Optional[ExperimentConfig] = None) -> SweepSpec:
    """
    Full parameter grid of the published comparison for (env, algorithm).

    Cell counts: behavior 1, q_lambda 54, greedy_gq 540, softmax_gq and offpac 4860.
    """
    cell_base = (base or ExperimentConfig()).with_overrides(env=env, algorithm=algorithm)
    return SweepSpec(cell_base, reported_grid(algorithm))


# ------------------------------------------------------------------ seeding

def derive_seed(base_seed: int, config_id: str, run_index: int) -> int:
    """Pure (base seed, cell, run) -> run seed mapping."""
    digest = hashlib.sha256(f"{base_seed}:{config_id}:{run_index}".encode('utf-8')).hexdigest()
    return int(digest[:16], 16)


def spawn_generators(seed: int, count: int) -> List[np.random.Generator]:
    """Independent counter-based streams (environment, behavior, evaluation)."""
    return [np.random.Generator(np.random.Philox(child))
            for child in np.random.SeedSequence(seed).spawn(count)]


def checkpoint_episodes(num_episodes: int, eval_points: int) -> List[int]:
    """Episode counts after which the target policy is evaluated, evenly spaced."""
    if eval_points <= 0 or num_episodes < eval_points:
        raise ConfigurationError("need 0 < eval_points <= num_episodes")
    return [(k * num_episodes) // eval_points for k in range(1, eval_points + 1)]


def weights_digest(weights: Dict[str, np.ndarray]) -> str:
    """Content hash of named vectors; equal digests mean bit-identical contents."""
    h = hashlib.sha256()
    for name in sorted(weights):
        h.update(name.encode('utf-8'))
        h.update(np.ascontiguousarray(weights[name]).tobytes())
    return h.hexdigest()


def learner_digest(learner: Any) -> str:
    """Digest of a learner's weights and the support and values of its traces."""
    vectors = dict(learner.weights())
    for name, trace in learner.traces().items():
        vectors[f"{name}.indices"] = trace.indices
        vectors[f"{name}.values"] = trace.values
    return weights_digest(vectors)


# ------------------------------------------------------------------ learners

class BehaviorLearner:
    """Non-learning stand-in whose evaluation policy is the uniform behavior itself."""

    learns = False

    def __init__(self, num_actions: int):
        self.policy = UniformBehavior(num_actions)

    def step(self, t: Transition) -> None:
        return None

    def episode_reset(self) -> None:
        return None

    def evaluation_policy(self) -> UniformBehavior:
        return self.policy

    def weights(self) -> Dict[str, np.ndarray]:
        return {}

    def traces(self) -> Dict[str, Any]:
        return {}


def make_learner(cfg: ExperimentConfig, encoder: Any, num_actions: int):
    alpha_v, alpha_w, alpha_u = cfg.effective_step_sizes()
    if cfg.algorithm == 'behavior':
        return BehaviorLearner(num_actions)
    if cfg.algorithm == 'q_lambda':
        return QLambdaAgent(encoder, num_actions, alpha_v, cfg.lam)
    if cfg.algorithm == 'greedy_gq':
        return GQAgent(encoder, num_actions, alpha_v, alpha_w, cfg.lam)
    if cfg.algorithm == 'softmax_gq':
        return GQAgent(encoder, num_actions, alpha_v, alpha_w, cfg.lam, tau=cfg.tau)
    if cfg.algorithm == 'offpac':
        return OffPacAgent(encoder, num_actions, OffPacHyperParams(alpha_v, alpha_w, alpha_u, cfg.lam))
    raise ConfigurationError(f"unknown algorithm '{cfg.algorithm}'")


def build_env(cfg: ExperimentConfig, rng: np.random.Generator):
    return make_env(cfg.env, rng, cfg.max_episode_steps, cfg.pendulum_params())


def train_episode(env: Any, encoder: Any, learner: Any, behavior: UniformBehavior,
                  rng: np.random.Generator, gamma: float) -> Tuple[int, float]:
    """
    One behavior episode feeding every transition to the learner.

    gamma(s') is zero only on a terminal step; hitting the step cap keeps it.
    Returns (steps, undiscounted return).
    """
    state = env.reset()
    learner.episode_reset()
    x_s, phi_s = encoder.encode_with_actions(state, env.num_actions)
    gamma_s = gamma
    steps, total = 0, 0.0
    while True:
        action = behavior.sample(state, rng)
        result = env.step(action)
        x_sp, phi_sp = encoder.encode_with_actions(result.state, env.num_actions)
        gamma_sp = 0.0 if result.terminal else gamma
        learner.step(Transition(x_s, action, behavior.prob(state, action), result.reward, x_sp,
                                gamma_s, gamma_sp, phi_s, phi_sp))
        steps += 1
        total += result.reward
        if result.done:
            return steps, total
        state, x_s, phi_s, gamma_s = result.state, x_sp, phi_sp, gamma_sp


def evaluate_policy(policy: Any, cfg: ExperimentConfig, rng: np.random.Generator) -> Tuple[float, ...]:
    """Returns of ``eval_episodes`` episodes of ``policy`` on a fresh environment instance."""
    env = build_env(cfg, rng)
    returns = []
    for _ in range(cfg.eval_episodes):
        state = env.reset()
        total = 0.0
        while True:
            result = env.step(policy.sample(state, rng))
            total += result.reward
            if result.done:
                break
            state = result.state
        returns.append(total)
    return tuple(returns)


# --------------------------------------------------------------------- runs

@dataclass(frozen=True)
class RunRecord:
    config_id: str
    run: int
    run_seed: int
    checkpoint_index: int
    checkpoint: int
    mean_return: float
    eval_returns: Tuple[float, ...]
    diverged: bool
    wall_clock: float = field(default=0.0, compare=False)

    @property
    def stderr_return(self) -> float:
        n = len(self.eval_returns)
        if n < 2:
            return 0.0
        return float(np.std(self.eval_returns, ddof=1) / np.sqrt(n))


def snapshot_path(snapshot_dir: str, config_id: str, run_index: int) -> str:
    return os.path.join(snapshot_dir, f"{config_id}_run{run_index}.npz")


def _evaluate_frozen(learner: Any, cfg: ExperimentConfig, rng: np.random.Generator,
                     config_id: str) -> Tuple[float, ...]:
    """Evaluate the learner's target policy and check evaluation left the learner untouched."""
    before = learner_digest(learner)
    returns = evaluate_policy(learner.evaluation_policy(), cfg, rng)
    if learner_digest(learner) != before:
        raise OffPacError(f"evaluation modified the learner of cell {config_id}")
    return returns


def run_single(cfg: ExperimentConfig, run_seed: int, run_index: int = 0,
               snapshot_dir: Optional[str] = None) -> List[RunRecord]:
    """
    Train ``cfg.algorithm`` from uniform-behavior data and evaluate a frozen copy of its
    target policy at each checkpoint.

    A run whose weights diverge stops learning; its remaining records carry a NaN
    return and the diverged flag. With ``snapshot_dir`` set, the weights reached at the
    last checkpoint of a run that did not diverge are saved there.
    """
    cfg.validate()
    config_id = cfg.config_id()
    started = time.perf_counter()
    env_rng, behavior_rng, eval_rng = spawn_generators(run_seed, 3)

    env = build_env(cfg, env_rng)
    encoder = TileCoder(cfg.tile_coder_config(env.state_lows, env.state_highs))
    learner = make_learner(cfg, encoder, env.num_actions)
    behavior = UniformBehavior(env.num_actions)

    logger.info(f"Run {run_index} of {cfg.algorithm} on {cfg.env} (cell {config_id}, "
                f"{cfg.episodes} episodes)")
    records = []
    episode = 0
    diverged = False
    for index, checkpoint in enumerate(checkpoint_episodes(cfg.episodes, cfg.eval_points)):
        while episode < checkpoint and not diverged:
            if not learner.learns:
                episode = checkpoint
                break
            try:
                steps, total = train_episode(env, encoder, learner, behavior, behavior_rng, cfg.gamma)
            except DivergenceError as e:
                logger.warning(f"Run {run_index} of cell {config_id} diverged in episode {episode + 1}: {e}")
                diverged = True
                break
            episode += 1
            logger.debug(f"Episode {episode}: {steps} steps, return {total:.1f}")

        if diverged:
            returns: Tuple[float, ...] = ()
            mean = float('nan')
        else:
            returns = _evaluate_frozen(learner, cfg, eval_rng, config_id)
            mean = float(np.mean(returns))
            logger.info(f"Checkpoint {index + 1}/{cfg.eval_points} (episode {checkpoint}): "
                        f"mean return {mean:.2f}")
        records.append(RunRecord(config_id, run_index, run_seed, index, checkpoint, mean, returns,
                                 diverged, time.perf_counter() - started))

    weights = learner.weights()
    if snapshot_dir is not None and weights and not diverged:
        os.makedirs(snapshot_dir, exist_ok=True)
        save_snapshot(snapshot_path(snapshot_dir, config_id, run_index), **weights)
    return records


# -------------------------------------------------------------------- sweeps

def _raw_row(cfg: ExperimentConfig, record: RunRecord) -> Dict[str, Any]:
    return {
        'config_id': record.config_id,
        'algorithm': cfg.algorithm,
        'env': cfg.env,
        'alpha_v_raw': cfg.alpha_v,
        'alpha_w_raw': cfg.alpha_w,
        'alpha_u_raw': cfg.alpha_u,
        'tau': cfg.tau,
        'lambda': cfg.lam,
        'run': record.run,
        'checkpoint': record.checkpoint,
        'mean_return': record.mean_return,
        'stderr_return': record.stderr_return,
        'diverged': int(record.diverged),
    }


def _run_task(task: Tuple[ExperimentConfig, int, int, Optional[str]]):
    cfg, run_index, run_seed, snapshot_dir = task
    try:
        return cfg, run_index, run_single(cfg, run_seed, run_index, snapshot_dir), None
    except Exception as e:
        logger.warning(f"Cell {cfg.config_id()} run {run_index} failed: {e}", exc_info=True)
        return cfg, run_index, [], f"{type(e).__name__}: {e}"


def run_sweep(spec: SweepSpec, out_dir: str, parallelism: int = 1,
              save_weights: bool = False) -> Dict[str, str]:
    """
    Run every (cell, run) pair of the sweep and write raw, failure and aggregated CSVs.
    With ``save_weights`` each run's final weights are saved under ``out_dir/weights``.

    Returns the written paths keyed by 'raw', 'failures' and 'aggregated'.
    """
    os.makedirs(out_dir, exist_ok=True)
    cells = spec.cells()
    snapshot_dir = os.path.join(out_dir, SNAPSHOT_DIR) if save_weights else None
    tasks = [(cell, run_index, derive_seed(cell.seed, cell.config_id(), run_index), snapshot_dir)
             for cell in cells for run_index in range(cell.num_runs)]
    logger.info(f"Sweep: {len(cells)} cells, {len(tasks)} runs, parallelism {parallelism}")

    if parallelism > 1:
        with Pool(parallelism) as p:
            results = p.map(_run_task, tasks)
    else:
        results = [_run_task(task) for task in tasks]

    rows, failures = [], []
    for cfg, run_index, records, error in results:
        if error is not None:
            failures.append({'config_id': cfg.config_id(), 'run': run_index, 'error': error})
        rows.extend(_raw_row(cfg, record) for record in records)
    rows.sort(key=lambda r: (r['config_id'], r['run'], r['checkpoint']))

    paths = {
        'raw': os.path.join(out_dir, RAW_FILE),
        'failures': os.path.join(out_dir, FAILURES_FILE),
        'aggregated': os.path.join(out_dir, AGGREGATED_FILE),
    }
    write_raw_csv(rows, paths['raw'])
    with open(paths['failures'], 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=['config_id', 'run', 'error'])
        writer.writeheader()
        writer.writerows(failures)
    if failures:
        logger.warning(f"{len(failures)} runs failed; see {paths['failures']}")

    if rows:
        write_frame(aggregate_runs(paths['raw']), paths['aggregated'])
    logger.info(f"Sweep complete: {len(rows)} rows written to {paths['raw']}")
    return paths


def write_raw_csv(rows: Sequence[Dict[str, Any]], path: str) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=RAW_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def write_frame(df: pd.DataFrame, path: str) -> None:
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep='na')


def _load(source: Union[str, pd.DataFrame]) -> pd.DataFrame:
    if isinstance(source, pd.DataFrame):
        return source.copy()
    return pd.read_csv(source, na_values=['na'])


# ------------------------------------------------------- aggregation / report

def aggregate_runs(raw: Union[str, pd.DataFrame]) -> pd.DataFrame:
    """
    Mean and standard error over runs per (cell, checkpoint).

    A cell with any diverged run gets a NaN mean at the affected checkpoints; a single
    run (or zero variance) gives stderr 0.
    """
    df = _load(raw)
    if df.empty:
        raise ConfigurationError("raw results are empty")
    keys = CELL_COLUMNS + ['checkpoint']
    grouped = df.groupby(keys, sort=True, dropna=False)
    out = grouped['mean_return'].agg(['mean', 'std', 'count']).reset_index()
    out['diverged'] = grouped['diverged'].max().values.astype(int)
    out['stderr_return'] = (out['std'] / np.sqrt(out['count'])).fillna(0.0)
    out.loc[out['diverged'] == 1, 'mean'] = np.nan
    out = out.rename(columns={'mean': 'mean_return', 'count': 'num_runs'}).drop(columns=['std'])
    return out[keys + ['mean_return', 'stderr_return', 'num_runs', 'diverged']]


def _window(group: pd.DataFrame, criterion: str) -> pd.DataFrame:
    checkpoints = np.sort(group['checkpoint'].unique())
    if criterion == 'final':
        keep = checkpoints[-max(1, -(-len(checkpoints) // 10)):]
    else:
        keep = checkpoints
    return group[group['checkpoint'].isin(keep)]


def cell_scores(aggregated: Union[str, pd.DataFrame], criterion: str) -> pd.DataFrame:
    """Per-cell score: mean return over the last 10% of checkpoints ('final') or all ('overall')."""
    if criterion not in CRITERIA:
        raise ConfigurationError(f"criterion must be one of {CRITERIA}, got '{criterion}'")
    df = _load(aggregated)
    if df.empty:
        raise ConfigurationError("aggregated results are empty")
    rows = []
    for _, group in df.groupby(CELL_COLUMNS, sort=True, dropna=False):
        window = _window(group, criterion)
        row = group.iloc[0][CELL_COLUMNS].to_dict()
        row['score'] = float(window['mean_return'].mean(skipna=False))
        rows.append(row)
    return pd.DataFrame(rows, columns=CELL_COLUMNS + ['score'])


def select_best(aggregated: Union[str, pd.DataFrame], criterion: str = 'final') -> pd.Series:
    """Row of the cell with the highest score; cells with diverged checkpoints never win."""
    scores = cell_scores(aggregated, criterion)
    valid = scores.dropna(subset=['score'])
    if valid.empty:
        raise ConfigurationError("no cell has a finite score")
    return valid.loc[valid['score'].idxmax()]


def _run_scores(raw: pd.DataFrame, config_id: str, criterion: str) -> np.ndarray:
    cell = raw[raw['config_id'] == config_id]
    window = _window(cell, criterion)
    return window.groupby('run', sort=True)['mean_return'].mean().to_numpy()


def _summary_row(best: pd.Series, criterion: str, raw: pd.DataFrame) -> Dict[str, Any]:
    algorithm = best['algorithm']
    per_run = _run_scores(raw, best['config_id'], criterion)
    stderr = float(np.std(per_run, ddof=1) / np.sqrt(len(per_run))) if len(per_run) > 1 else 0.0
    alpha_u_tau = {'offpac': best['alpha_u_raw'], 'softmax_gq': best['tau']}.get(algorithm, np.nan)
    uses_w = algorithm in ('greedy_gq', 'softmax_gq', 'offpac')
    return {
        'env': best['env'],
        'algorithm': algorithm,
        'criterion': criterion,
        'alpha_w': best['alpha_w_raw'] if uses_w else np.nan,
        'alpha_u_tau': alpha_u_tau,
        'alpha_v': best['alpha_v_raw'] if algorithm != 'behavior' else np.nan,
        'lambda': best['lambda'] if algorithm != 'behavior' else np.nan,
        'reward': best['score'],
        'stderr': stderr,
    }


def emit_report(raw_csv: Union[str, pd.DataFrame], out_dir: str) -> Tuple[str, str]:
    """
    Write the learning curves of each (env, algorithm)'s best-final cell and a summary
    table of the best cells under both criteria. Returns (curves path, summary path).
    """
    raw = _load(raw_csv)
    aggregated = aggregate_runs(raw)
    os.makedirs(out_dir, exist_ok=True)

    curves, summary = [], []
    for (env, algorithm), group in aggregated.groupby(['env', 'algorithm'], sort=True):
        for criterion in CRITERIA:
            try:
                best = select_best(group, criterion)
            except ConfigurationError as e:
                logger.warning(f"No selectable cell for {env}/{algorithm} ({criterion}): {e}")
                continue
            summary.append(_summary_row(best, criterion, raw))
            if criterion == 'final':
                curve = group[group['config_id'] == best['config_id']]
                curves.append(curve[['env', 'algorithm', 'config_id', 'checkpoint',
                                     'mean_return', 'stderr_return']])

    curves_path = os.path.join(out_dir, CURVES_FILE)
    summary_path = os.path.join(out_dir, SUMMARY_FILE)
    curve_df = (pd.concat(curves, ignore_index=True) if curves else
                pd.DataFrame(columns=['env', 'algorithm', 'config_id', 'checkpoint',
                                      'mean_return', 'stderr_return']))
    curve_df = curve_df.sort_values(['env', 'algorithm', 'checkpoint'], kind='mergesort')
    summary_df = pd.DataFrame(summary, columns=SUMMARY_COLUMNS)
    summary_df = summary_df.sort_values(['env', 'algorithm', 'criterion'], kind='mergesort')
    write_frame(curve_df, curves_path)
    write_frame(summary_df, summary_path)
    logger.info(f"Report written: {curves_path}, {summary_path}")
    return curves_path, summary_path
