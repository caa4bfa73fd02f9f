"""Joint-state, joint-action tabular Q-learning and policy evaluation."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .core import (
    GridConfig,
    JointState,
    Policy,
    action_index,
    agent_views,
    assemble_joint_state,
    check_state,
    decode_state,
    join_action,
    split_action,
    state_index,
)
from .kernels import get_backend, kernel_model
from .policies import QTable, epsilon_greedy
from .rng import RngStream
from .stochastic import step_environment

BASELINE = "greedy_baseline"


class ScheduleKind(str, enum.Enum):
    CONSTANT = "constant"
    POLYNOMIAL_DECAY = "polynomial_decay"


@dataclass(frozen=True)
class LearningSchedule:
    """Step size: constant ``alpha0`` or ``alpha0 / n(s, a)**omega``."""

    kind: ScheduleKind = ScheduleKind.CONSTANT
    alpha0: float = 0.1
    omega: float = 0.6

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not 0 < self.alpha0 <= 1:
            raise ValueError("alpha0 must be in (0, 1]")
        if self.kind is ScheduleKind.POLYNOMIAL_DECAY and not 0.5 < self.omega <= 1:
            raise ValueError("decay exponent must be in (0.5, 1]")

    @classmethod
    def constant(cls, alpha: float = 0.1) -> LearningSchedule:
        return cls(ScheduleKind.CONSTANT, alpha)

    @classmethod
    def polynomial(cls, alpha0: float = 1.0, omega: float = 0.6) -> LearningSchedule:
        return cls(ScheduleKind.POLYNOMIAL_DECAY, alpha0, omega)

    @property
    def decays(self) -> bool:
        return self.kind is ScheduleKind.POLYNOMIAL_DECAY

    def alpha(self, visits: int) -> float:
        if self.decays:
            return self.alpha0 / float(visits) ** self.omega
        return self.alpha0


@dataclass(frozen=True)
class EvalMetrics:
    avg_signed_deficit: float
    avg_squared_deficit: float
    avg_main_power: float
    steps: int


@dataclass(frozen=True)
class LogRow:
    step: int
    running_avg_deficit: float
    epsilon: float
    alpha: float


@dataclass
class TrainingResult:
    q: QTable
    log: list[LogRow] = field(default_factory=list)
    final_state: JointState | None = None
    cumulative_deficit: int = 0


def q_update(q: QTable, s: int, a: int, r: float, s_next: int, alpha: float, gamma: float) -> float:
    """Move Q(s, a) toward ``r + gamma * max_a' Q(s_next, a')`` and return the new value.

    The max runs over actions feasible in ``s_next`` only.
    """
    n_states, n_actions = q.values.shape
    if not (0 <= s < n_states and 0 <= s_next < n_states and 0 <= a < n_actions):
        raise IndexError(f"(s={s}, a={a}, s'={s_next}) outside the Q-table")
    q_sa = float(q.values[s, a])
    target = r + gamma * q.max_value(decode_state(s_next, q.config))
    q.values[s, a] = q_sa + alpha * (target - q_sa)
    return float(q.values[s, a])


def _default_log_every(steps: int) -> int:
    return max(1, steps // 100) if steps > 0 else 0


def train(
    config: GridConfig,
    schedule: LearningSchedule,
    epsilon: float,
    steps: int,
    seed: int,
    initial_state: JointState | None = None,
    log_every: int | None = None,
    backend: str | None = None,
) -> TrainingResult:
    """Run the ε-greedy joint Q-learning loop for ``steps`` slots.

    Deterministic in ``seed`` and independent of backend.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must be in [0, 1]")
    state = config.initial_state() if initial_state is None else JointState(*initial_state)
    check_state(state, config)
    log_every = _default_log_every(steps) if log_every is None else log_every
    n_log = steps // log_every if log_every > 0 else 0
    log_step = np.zeros(n_log, dtype=np.int64)
    log_avg = np.zeros(n_log)
    log_alpha = np.zeros(n_log)
    q = QTable.zeros(config)
    final, cum = get_backend(backend).train(
        kernel_model(config), q.values, q.visit_counts, RngStream(seed),
        state_index(state, config), steps, float(epsilon), float(schedule.alpha0),
        float(schedule.omega), schedule.decays, log_every, log_step, log_avg, log_alpha,
    )
    log = [
        LogRow(int(t), float(avg), float(epsilon), float(al))
        for t, avg, al in zip(log_step, log_avg, log_alpha)
    ]
    return TrainingResult(q, log, decode_state(int(final), config), int(cum))


def train_stepwise(
    config: GridConfig,
    schedule: LearningSchedule,
    epsilon: float,
    steps: int,
    seed: int,
    initial_state: JointState | None = None,
) -> tuple[QTable, list[tuple]]:
    """Slow, readable version of ``train`` built from the public operations.

    Each slot the agents exchange battery levels, pick a joint action and
    apply their own part of it. Returns the table and a per-step transcript of
    ``(s, a, reward, signed_deficit, s_next)``.
    """
    rng = RngStream(seed)
    q = QTable.zeros(config)
    state = config.initial_state() if initial_state is None else JointState(*initial_state)
    transcript = []
    for _ in range(steps):
        joint = assemble_joint_state(agent_views(state), config)
        action = join_action(split_action(epsilon_greedy(q, joint, epsilon, config, rng)))
        step = step_environment(joint, action, config, rng)
        s, a = state_index(joint, config), action_index(action, config)
        s2 = state_index(step.state_after, config)
        q.visit_counts[s, a] += 1
        q_update(q, s, a, step.reward, s2, schedule.alpha(int(q.visit_counts[s, a])), config.gamma)
        transcript.append((s, a, step.reward, step.demand_before - action.supply, s2))
        state = step.state_after
    return q, transcript


def evaluate_policy(
    policy: Union[Policy, str, None],
    config: GridConfig,
    steps: int,
    seed: int,
    initial_state: JointState | None = None,
    backend: str | None = None,
) -> EvalMetrics:
    """Average deficit statistics of a fixed policy or of the no-storage baseline.

    Pass ``BASELINE`` (or None) for the baseline. Both consume the same random
    draws per slot, so equal seeds give both the same demand and generation paths.
    """
    if steps <= 0:
        raise ValueError("steps must be > 0")
    state = config.initial_state() if initial_state is None else JointState(*initial_state)
    check_state(state, config)
    if policy is None or (isinstance(policy, str) and policy == BASELINE):
        actions = None
    elif isinstance(policy, Policy):
        actions = np.ascontiguousarray(policy.actions, dtype=np.int64)
    else:
        raise TypeError(f"cannot evaluate {policy!r}")
    sum_def, sum_sq, sum_main, _ = get_backend(backend).evaluate(
        kernel_model(config), actions, RngStream(seed), state_index(state, config), steps
    )
    return EvalMetrics(sum_def / steps, sum_sq / steps, sum_main / steps, steps)


def write_training_log(log: list[LogRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "running_avg_deficit", "epsilon", "alpha"])
        for row in log:
            writer.writerow([row.step, repr(row.running_avg_deficit), repr(row.epsilon), repr(row.alpha)])
