"""Microgrid dispatch MDP with joint tabular Q-learning and an exact oracle."""

from .core import (
    AgentId,
    AgentView,
    ConfigError,
    GridConfig,
    JointAction,
    JointState,
    Policy,
    RewardMode,
    assemble_joint_state,
    battery_step,
    enumerate_states,
    feasible_actions,
    reward_costaware,
    reward_deficit,
    split_action,
    validate_config,
)
from .kernels import get_backend
from .oracle import build_exact_model, exact_policy_value, stationary_distribution, value_iteration
from .policies import QTable, epsilon_greedy, greedy_baseline_action, greedy_from_q
from .qlearning import BASELINE, EvalMetrics, LearningSchedule, evaluate_policy, q_update, train
from .rng import RngStream, derive_seed
from .stochastic import next_demand, sample_generation, step_environment

__version__ = "0.1.0"
