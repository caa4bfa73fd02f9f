"""Demand chain, Poisson generation and the one-step environment transition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    GridConfig,
    InfeasibleActionError,
    JointAction,
    JointState,
    battery_step,
    check_state,
    is_feasible,
    reward,
)
from .rng import RngStream, cumulative_row, invert_cdf, poisson_cdf_table


@dataclass(frozen=True)
class StepTranscript:
    demand_before: int
    action: JointAction
    reward: float
    generation_draw: tuple[int, int]
    demand_after: int
    state_after: JointState


def next_demand(demand_index: int, transition_matrix, rng: RngStream) -> int:
    row = np.asarray(transition_matrix, dtype=float)[demand_index]
    cum, fallback = cumulative_row(row)
    return invert_cdf(rng.next_double(), cum, fallback)


def sample_generation(mean: float, rng: RngStream) -> int:
    """One Poisson draw by CDF inversion (always consumes exactly one uniform)."""
    table = poisson_cdf_table(mean)
    return invert_cdf(rng.next_double(), table, len(table))


def step_environment(
    state: JointState, action: JointAction, config: GridConfig, rng: RngStream
) -> StepTranscript:
    """Advance one slot.

    The reward is charged against the demand the action was chosen for. Draw
    order is solar generation, wind generation, next demand.
    """
    check_state(state, config)
    if not is_feasible(state, action, config):
        raise InfeasibleActionError(f"action {tuple(action)} infeasible in state {tuple(state)}")
    demand = config.demand_levels[state.demand_index]
    r = reward(demand, action, config)
    gs = sample_generation(config.gen_mean_solar, rng)
    gw = sample_generation(config.gen_mean_wind, rng)
    d2 = next_demand(state.demand_index, config.demand_transition, rng)
    after = JointState(
        d2,
        battery_step(state.solar_level, action.solar_power, gs, config.solar_capacity),
        battery_step(state.wind_level, action.wind_power, gw, config.wind_capacity),
    )
    return StepTranscript(
        demand_before=demand,
        action=JointAction(*action),
        reward=r,
        generation_draw=(gs, gw),
        demand_after=config.demand_levels[d2],
        state_after=after,
    )


def empirical_frequencies(draws: Sequence[int], n_outcomes: int) -> np.ndarray:
    counts = np.bincount(np.asarray(draws, dtype=np.int64), minlength=n_outcomes)
    return counts / counts.sum()
