"""
Off-PAC

Off-policy actor-critic learning with a Gibbs actor and a GTD(lambda) critic,
action-value baselines, benchmark environments, an exact tabular oracle and an
experiment harness.
"""

from .baselines import GQAgent, QLambdaAgent, gq_step, q_lambda_step
from .config import ExperimentConfig, SweepSpec, load_config, load_sweep
from .envs import TabularMDP, make_env
from .errors import ConfigurationError, DivergenceError, OffPacError, OracleError
from .features import (EligibilityTrace, SparseFeatures, SparseVector, TileCoder, TileCoderConfig,
                       tile_code_state, tile_code_state_action)
from .gtd_critic import CriticState, Transition, critic_step
from .harness import RunRecord, emit_report, run_single, run_sweep, select_best
from .offpac_actor import OffPacAgent, OffPacHyperParams, actor_step, agent_step
from .cli import main

__version__ = "1.0.0"

__all__ = [
    "ConfigurationError", "CriticState", "DivergenceError", "EligibilityTrace", "ExperimentConfig", "GQAgent",
    "OffPacAgent", "OffPacError", "OffPacHyperParams", "OracleError", "QLambdaAgent",
    "RunRecord", "SparseFeatures", "SparseVector", "SweepSpec", "TabularMDP", "TileCoder",
    "TileCoderConfig", "Transition", "actor_step", "agent_step", "critic_step", "emit_report",
    "gq_step", "load_config", "load_sweep", "main", "make_env", "q_lambda_step", "run_single",
    "run_sweep", "select_best", "tile_code_state", "tile_code_state_action",
]
