"""Action selection: the no-storage baseline, ε-greedy, and greedy extraction."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    GridConfig,
    JointAction,
    JointState,
    Policy,
    feasible_mask,
    state_index,
)
from .rng import RngStream


@dataclass
class QTable:
    """Dense action values and visit counts over (state index, action index).

    Only entries feasible in their state are ever argmax candidates.
    """

    config: GridConfig
    values: np.ndarray = field(repr=False)
    visit_counts: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, config: GridConfig) -> QTable:
        shape = (config.n_states, config.n_actions)
        return cls(config, np.zeros(shape), np.zeros(shape, dtype=np.int64))

    @property
    def state_visits(self) -> np.ndarray:
        return self.visit_counts.sum(axis=1)

    def state_box(self, state: JointState, array: np.ndarray | None = None) -> np.ndarray:
        """Feasible block of one state's row, shaped (solar draw, wind draw, main)."""
        cfg = self.config
        row = (self.values if array is None else array)[state_index(state, cfg)]
        box = row.reshape(cfg.solar_capacity + 1, cfg.wind_capacity + 1, cfg.max_prod + 1)
        return box[: state.solar_level + 1, : state.wind_level + 1, :]

    def best_action(self, state: JointState) -> JointAction:
        box = self.state_box(state)
        sp, wp, m = np.unravel_index(int(np.argmax(box)), box.shape)
        return JointAction(int(sp), int(wp), int(m))

    def max_value(self, state: JointState) -> float:
        return float(self.state_box(state).max())

    def save(self, path: str | Path) -> None:
        """Write ``state,action,value,visits`` rows; values use round-trip repr."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["state", "action", "value", "visits"])
            for s in range(self.values.shape[0]):
                for a in range(self.values.shape[1]):
                    writer.writerow([s, a, repr(float(self.values[s, a])), int(self.visit_counts[s, a])])

    @classmethod
    def load(cls, path: str | Path, config: GridConfig) -> QTable:
        table = cls.zeros(config)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["state", "action", "value", "visits"]:
                raise ValueError(f"{path}: unexpected Q-table header {reader.fieldnames}")
            for row in reader:
                s, a = int(row["state"]), int(row["action"])
                table.values[s, a] = float(row["value"])
                table.visit_counts[s, a] = int(row["visits"])
        return table


def greedy_baseline_action(demand: int, solar_gen: int, wind_gen: int, max_prod: int) -> JointAction:
    """Use all generation immediately and top up from the main grid up to its cap."""
    main = max(0, min(max_prod, demand - (solar_gen + wind_gen)))
    return JointAction(solar_gen, wind_gen, main)


def epsilon_greedy(
    q: QTable, state: JointState, epsilon: float, config: GridConfig, rng: RngStream
) -> JointAction:
    """Uniform feasible action with probability ``epsilon``, else the first argmax.

    Consumes one uniform for the coin and a second one only when exploring.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.next_double() < epsilon:
        wl1, m1 = state.wind_level + 1, config.max_prod + 1
        k = rng.next_below((state.solar_level + 1) * wl1 * m1)
        rest, m = divmod(k, m1)
        sp, wp = divmod(rest, wl1)
        return JointAction(sp, wp, m)
    return q.best_action(state)


def greedy_from_q(q: QTable | np.ndarray, config: GridConfig) -> Policy:
    """Feasible argmax per state, ties to the lowest action index."""
    values = q.values if isinstance(q, QTable) else np.asarray(q, dtype=float)
    masked = np.where(feasible_mask(config), values, -np.inf)
    return Policy(config, np.argmax(masked, axis=1))
