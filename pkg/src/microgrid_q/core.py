"""Domain types, feasibility, rewards and battery dynamics for the microgrid MDP.

Power is measured in integer units throughout. A joint state is the triple
(demand index, solar battery level, wind battery level) and a joint action is
(solar draw, wind draw, main-grid draw).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np


class RewardMode(str, enum.Enum):
    DEFICIT_ONLY = "deficit_only"
    COSTAWARE_PAPER_LITERAL = "costaware_paper_literal"
    COSTAWARE_PENALIZE_MAIN = "costaware_penalize_main"


class AgentId(str, enum.Enum):
    SOLAR_GRID = "solar_grid"
    WIND_GRID = "wind_grid"


class ConfigError(ValueError):
    """Raised when a GridConfig violates one or more invariants.

    ``errors`` holds one message per violated invariant.
    """

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SynchronizationError(ValueError):
    pass


class InfeasibleActionError(ValueError):
    pass


PAPER_DEMAND_LEVELS = (8, 10, 12)
PAPER_DEMAND_TRANSITION = (
    (0.1, 0.6, 0.3),
    (0.3, 0.1, 0.6),
    (0.6, 0.3, 0.1),
)


@dataclass(frozen=True)
class GridConfig:
    """A complete problem instance. Construct freely; check with validate_config."""

    demand_levels: tuple[int, ...] = PAPER_DEMAND_LEVELS
    demand_transition: tuple[tuple[float, ...], ...] = PAPER_DEMAND_TRANSITION
    solar_capacity: int = 5
    wind_capacity: int = 5
    max_prod: int = 8
    gen_mean_solar: float = 2.0
    gen_mean_wind: float = 2.0
    gamma: float = 0.9
    cost_weight_c: float = 1.0
    reward_mode: RewardMode = RewardMode.DEFICIT_ONLY

    def __post_init__(self) -> None:
        # normalize containers so configs stay hashable and comparable
        object.__setattr__(self, "demand_levels", tuple(self.demand_levels))
        object.__setattr__(
            self, "demand_transition", tuple(tuple(row) for row in self.demand_transition)
        )
        object.__setattr__(self, "reward_mode", RewardMode(self.reward_mode))

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.asarray(self.demand_transition, dtype=float)

    @property
    def n_states(self) -> int:
        return len(self.demand_levels) * (self.solar_capacity + 1) * (self.wind_capacity + 1)

    @property
    def n_actions(self) -> int:
        """Size of the maximal action index space (the full-battery box)."""
        return (self.solar_capacity + 1) * (self.wind_capacity + 1) * (self.max_prod + 1)

    def initial_state(self) -> JointState:
        """Lowest demand with both batteries full; [8, 5, 5] for the paper setup."""
        return JointState(0, self.solar_capacity, self.wind_capacity)


def paper_config(**overrides) -> GridConfig:
    return GridConfig(**overrides)


def validate_config(config: GridConfig) -> GridConfig:
    """Return ``config`` unchanged or raise ConfigError listing every violation."""
    errors: list[str] = []
    levels = config.demand_levels
    if not levels:
        errors.append("demand_levels must be nonempty")
    if any(int(x) != x or x < 0 for x in levels):
        errors.append("demand_levels must be nonnegative integers")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        errors.append("demand_levels must be strictly increasing")

    matrix = config.demand_transition
    if len(matrix) != len(levels) or any(len(row) != len(levels) for row in matrix):
        errors.append(
            f"demand_transition must be {len(levels)}x{len(levels)} to match demand_levels"
        )
    for i, row in enumerate(matrix):
        if any(not math.isfinite(p) or p < 0 for p in row):
            errors.append(f"row {i} has a negative or non-finite entry")
        total = math.fsum(row)
        if abs(total - 1.0) > 1e-12:
            errors.append(f"row {i} sums to {total:.12g}")

    for name in ("solar_capacity", "wind_capacity", "max_prod"):
        value = getattr(config, name)
        if int(value) != value:
            errors.append(f"{name} must be an integer")
        elif value < 0:
            errors.append(f"{name} must be >= 0")
    for name in ("gen_mean_solar", "gen_mean_wind"):
        value = getattr(config, name)
        if not (math.isfinite(value) and value >= 0):
            errors.append(f"{name} must be a nonnegative real")

    if not config.gamma >= 0:
        errors.append("gamma must be >= 0")
    if not config.gamma < 1:
        errors.append("gamma must be < 1")
    if not 0 <= config.cost_weight_c <= 1:
        errors.append("cost_weight_c must be in [0, 1]")

    if errors:
        raise ConfigError(errors)
    return config


class JointState(NamedTuple):
    demand_index: int
    solar_level: int
    wind_level: int


class JointAction(NamedTuple):
    solar_power: int
    wind_power: int
    main_power: int

    @property
    def supply(self) -> int:
        return self.solar_power + self.wind_power + self.main_power


@dataclass(frozen=True)
class AgentView:
    agent_id: AgentId
    local_battery_level: int
    observed_demand_index: int


def check_state(state: JointState, config: GridConfig) -> None:
    d, sl, wl = state
    if not (0 <= d < len(config.demand_levels)):
        raise ValueError(f"demand index {d} out of range")
    if not (0 <= sl <= config.solar_capacity and 0 <= wl <= config.wind_capacity):
        raise ValueError(f"battery levels ({sl}, {wl}) outside capacity")


def state_index(state: JointState, config: GridConfig) -> int:
    d, sl, wl = state
    return (d * (config.solar_capacity + 1) + sl) * (config.wind_capacity + 1) + wl


def decode_state(index: int, config: GridConfig) -> JointState:
    rest, wl = divmod(index, config.wind_capacity + 1)
    d, sl = divmod(rest, config.solar_capacity + 1)
    return JointState(d, sl, wl)


def enumerate_states(config: GridConfig) -> list[JointState]:
    """All joint states in lexicographic (demand, solar, wind) order.

    The position in the returned list is the state's index.
    """
    return [
        JointState(d, sl, wl)
        for d in range(len(config.demand_levels))
        for sl in range(config.solar_capacity + 1)
        for wl in range(config.wind_capacity + 1)
    ]


def action_index(action: JointAction, config: GridConfig) -> int:
    sp, wp, m = action
    return (sp * (config.wind_capacity + 1) + wp) * (config.max_prod + 1) + m


def decode_action(index: int, config: GridConfig) -> JointAction:
    rest, m = divmod(index, config.max_prod + 1)
    sp, wp = divmod(rest, config.wind_capacity + 1)
    return JointAction(sp, wp, m)


def is_feasible(state: JointState, action: JointAction, config: GridConfig) -> bool:
    sp, wp, m = action
    return (
        0 <= sp <= state.solar_level
        and 0 <= wp <= state.wind_level
        and 0 <= m <= config.max_prod
    )


def feasible_actions(state: JointState, config: GridConfig) -> list[JointAction]:
    """Every feasible joint action in lexicographic order.

    Lexicographic order within the feasible box agrees with the global action
    index order, so "lowest index" tie-breaking is the same in both views.
    """
    return [
        JointAction(sp, wp, m)
        for sp in range(state.solar_level + 1)
        for wp in range(state.wind_level + 1)
        for m in range(config.max_prod + 1)
    ]


def feasible_mask(config: GridConfig) -> np.ndarray:
    """Boolean (n_states, n_actions) array of feasibility."""
    sc, wc, mp = config.solar_capacity, config.wind_capacity, config.max_prod
    sl = np.arange(sc + 1)[:, None]
    wl = np.arange(wc + 1)[:, None]
    ok_s = np.arange(sc + 1)[None, :] <= sl  # (level, draw)
    ok_w = np.arange(wc + 1)[None, :] <= wl
    box = ok_s[:, None, :, None, None] & ok_w[None, :, None, :, None]
    box = np.broadcast_to(box, (sc + 1, wc + 1, sc + 1, wc + 1, mp + 1))
    box = box.reshape((sc + 1) * (wc + 1), -1)
    return np.tile(box, (len(config.demand_levels), 1))


def battery_step(level: int, used: int, generated: int, capacity: int) -> int:
    """Next battery level; surplus generation above capacity is discarded."""
    if not 0 <= used <= level:
        raise InfeasibleActionError(f"cannot draw {used} units from a battery holding {level}")
    if generated < 0:
        raise ValueError("generation must be nonnegative")
    return min(capacity, level - used + generated)


def reward_deficit(demand: int, action: JointAction) -> float:
    gap = demand - (action[0] + action[1] + action[2])
    return -float(gap * gap)


def reward_costaware(demand: int, action: JointAction, c: float, mode: RewardMode | str) -> float:
    """Cost-aware reward trading squared deficit against main-grid draw.

    ``costaware_paper_literal`` adds ``(1 - c) * main**2`` as printed in the
    original formulation; ``costaware_penalize_main`` subtracts it.
    """
    if not 0 <= c <= 1:
        raise ValueError(f"cost weight c={c} outside [0, 1]")
    mode = RewardMode(mode)
    gap = demand - (action[0] + action[1] + action[2])
    main_sq = float(action[2] * action[2])
    if mode is RewardMode.COSTAWARE_PAPER_LITERAL:
        return -c * float(gap * gap) + (1 - c) * main_sq
    if mode is RewardMode.COSTAWARE_PENALIZE_MAIN:
        return -c * float(gap * gap) - (1 - c) * main_sq
    raise ValueError(f"{mode.value} is not a cost-aware reward mode")


def reward(demand: int, action: JointAction, config: GridConfig) -> float:
    """Single-stage reward under the config's reward mode."""
    if config.reward_mode is RewardMode.DEFICIT_ONLY:
        return reward_deficit(demand, action)
    return reward_costaware(demand, action, config.cost_weight_c, config.reward_mode)


def reward_table(config: GridConfig) -> np.ndarray:
    """Rewards indexed by (demand index, battery supply, main draw).

    Battery supply is solar + wind draw; the kernels look rewards up here so
    every backend uses bit-identical values.
    """
    supply_max = config.solar_capacity + config.wind_capacity
    table = np.empty((len(config.demand_levels), supply_max + 1, config.max_prod + 1))
    for d, demand in enumerate(config.demand_levels):
        for b in range(supply_max + 1):
            for m in range(config.max_prod + 1):
                table[d, b, m] = reward(demand, JointAction(b, 0, m), config)
    return table


def assemble_joint_state(views: Iterable[AgentView], config: GridConfig) -> JointState:
    """Combine the microgrids' exchanged battery levels into the joint state."""
    by_agent: dict[AgentId, AgentView] = {}
    for view in views:
        agent = AgentId(view.agent_id)
        if agent in by_agent:
            raise SynchronizationError(f"duplicate agent {agent.value}")
        by_agent[agent] = view
    for agent in AgentId:
        if agent not in by_agent:
            raise SynchronizationError(f"missing agent {agent.value}")
    solar, wind = by_agent[AgentId.SOLAR_GRID], by_agent[AgentId.WIND_GRID]
    if solar.observed_demand_index != wind.observed_demand_index:
        raise SynchronizationError(
            f"agents disagree on demand index: {solar.observed_demand_index} "
            f"vs {wind.observed_demand_index}"
        )
    state = JointState(
        solar.observed_demand_index, solar.local_battery_level, wind.local_battery_level
    )
    check_state(state, config)
    return state


def agent_views(state: JointState) -> list[AgentView]:
    return [
        AgentView(AgentId.SOLAR_GRID, state.solar_level, state.demand_index),
        AgentView(AgentId.WIND_GRID, state.wind_level, state.demand_index),
    ]


def split_action(action: JointAction) -> dict[str, int]:
    return {
        AgentId.SOLAR_GRID.value: action.solar_power,
        AgentId.WIND_GRID.value: action.wind_power,
        "main": action.main_power,
    }


def join_action(parts: Mapping[str, int]) -> JointAction:
    return JointAction(
        parts[AgentId.SOLAR_GRID.value], parts[AgentId.WIND_GRID.value], parts["main"]
    )


@dataclass(frozen=True)
class Policy:
    """Deterministic stationary policy stored as one action index per state."""

    config: GridConfig
    actions: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        actions = np.asarray(self.actions, dtype=np.int64)
        if actions.shape != (self.config.n_states,):
            raise ValueError("policy must assign an action to every state")
        mask = feasible_mask(self.config)
        if not mask[np.arange(actions.size), actions].all():
            bad = int(np.flatnonzero(~mask[np.arange(actions.size), actions])[0])
            raise InfeasibleActionError(f"policy action infeasible in state {bad}")
        actions.setflags(write=False)
        object.__setattr__(self, "actions", actions)

    @classmethod
    def from_mapping(cls, config: GridConfig, mapping: Mapping[JointState, JointAction]) -> Policy:
        states = enumerate_states(config)
        missing = [s for s in states if s not in mapping]
        if missing:
            raise ValueError(f"policy is not total; missing {missing[0]}")
        return cls(config, np.array([action_index(mapping[s], config) for s in states]))

    def __getitem__(self, state: JointState) -> JointAction:
        return decode_action(int(self.actions[state_index(state, self.config)]), self.config)

    def as_dict(self) -> dict[JointState, JointAction]:
        return {s: self[s] for s in enumerate_states(self.config)}
