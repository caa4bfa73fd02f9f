"""Exact transition model of the simulator and its value-iteration solution.

The simulator's dynamics are known, so the MDP can be written down exactly:
demand follows its Markov chain, and each battery moves to
``min(capacity, level - used + g)`` with ``g`` Poisson. The three kernels are
independent given (state, action), so the joint kernel is their product.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .core import (
    GridConfig,
    Policy,
    decode_action,
    enumerate_states,
    feasible_mask,
    reward_table,
    validate_config,
)


@dataclass(frozen=True)
class ExactModel:
    """P(s' | s, a) of shape (S, A, S) and R(s, a) of shape (S, A).

    Rows for infeasible (s, a) pairs are all zero; ``feasible`` marks the rest.
    """

    config: GridConfig
    transition: np.ndarray
    reward: np.ndarray
    feasible: np.ndarray
    gamma: float


@dataclass(frozen=True)
class ValueIterationResult:
    values: np.ndarray
    q: np.ndarray
    policy: Policy
    residual: float
    sweeps: int


def battery_kernel(capacity: int, mean: float) -> np.ndarray:
    """K[r, l'] = P(next level l' | r units left after the draw).

    Poisson tail mass that would overflow the battery is lumped at capacity.
    """
    kernel = np.zeros((capacity + 1, capacity + 1))
    pmf = np.array([math.exp(-mean) * mean**g / math.factorial(g) for g in range(capacity + 1)])
    if mean == 0:
        pmf = np.zeros(capacity + 1)
        pmf[0] = 1.0
    for r in range(capacity + 1):
        room = capacity - r
        kernel[r, r:capacity] = pmf[:room]
        kernel[r, capacity] = max(0.0, 1.0 - pmf[:room].sum())
    return kernel


def build_exact_model(config: GridConfig) -> ExactModel:
    validate_config(config)
    sc, wc, mp = config.solar_capacity, config.wind_capacity, config.max_prod
    nd = len(config.demand_levels)
    demand = config.transition_matrix
    ks = battery_kernel(sc, config.gen_mean_solar)
    kw = battery_kernel(wc, config.gen_mean_wind)

    d, sl, wl = np.meshgrid(np.arange(nd), np.arange(sc + 1), np.arange(wc + 1), indexing="ij")
    sp, wp, m = np.meshgrid(np.arange(sc + 1), np.arange(wc + 1), np.arange(mp + 1), indexing="ij")
    d, sl, wl = d.ravel()[:, None], sl.ravel()[:, None], wl.ravel()[:, None]
    sp, wp, m = sp.ravel()[None, :], wp.ravel()[None, :], m.ravel()[None, :]
    mask = feasible_mask(config)
    rs = np.clip(sl - sp, 0, sc)
    rw = np.clip(wl - wp, 0, wc)
    dd = np.broadcast_to(d, rs.shape)

    transition = (
        demand[dd][..., :, None, None]
        * ks[rs][..., None, :, None]
        * kw[rw][..., None, None, :]
    ).reshape(config.n_states, config.n_actions, config.n_states)
    transition[~mask] = 0.0

    rewards = reward_table(config)[dd, np.broadcast_to(sp + wp, rs.shape), np.broadcast_to(m, rs.shape)]
    return ExactModel(config, transition, np.ascontiguousarray(rewards), mask, float(config.gamma))


def bellman_q(model: ExactModel, values: np.ndarray) -> np.ndarray:
    """Q(s, a) = R(s, a) + gamma * E[V(s')], with -inf on infeasible pairs."""
    q = model.reward + model.gamma * (model.transition @ values)
    return np.where(model.feasible, q, -np.inf)


def bellman_backup(model: ExactModel, values: np.ndarray) -> np.ndarray:
    return bellman_q(model, values).max(axis=1)


def value_iteration(
    model: ExactModel, tol: float = 1e-9, max_sweeps: int = 100_000
) -> ValueIterationResult:
    """Iterate the Bellman optimality operator until the sup-norm change is small.

    Stops once ``|V_{k+1} - V_k| < tol * (1 - gamma) / (2 * gamma)``, which
    bounds the distance to the fixed point by ``tol / 2``. The reported
    residual is ``|T V - V|`` at the returned ``V``.
    """
    if not 0 <= model.gamma < 1:
        raise ValueError("value iteration needs gamma < 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    gamma = model.gamma
    threshold = tol * (1 - gamma) / (2 * gamma) if gamma > 0 else math.inf
    values = np.zeros(model.reward.shape[0])
    sweeps = 0
    while True:
        new = bellman_backup(model, values)
        sweeps += 1
        change = float(np.max(np.abs(new - values)))
        values = new
        if change < threshold or sweeps >= max_sweeps:
            break
    q = bellman_q(model, values)
    residual = float(np.max(np.abs(q.max(axis=1) - values)))
    policy = Policy(model.config, np.argmax(optimal_action_sets(q, tol), axis=1))
    return ValueIterationResult(values, q, policy, residual, sweeps)


def optimal_action_sets(q: np.ndarray, tie_tol: float) -> np.ndarray:
    """Boolean (S, A) mask of actions within ``tie_tol`` of each state's best.

    Actions closer than the solver tolerance cannot be ordered reliably (the
    solar/wind symmetry produces exact ties that round-off splits at 1e-18), so
    they are treated as tied and the greedy policy takes the lowest index.
    """
    return q >= q.max(axis=1, keepdims=True) - tie_tol


PolicyLike = Union[Policy, np.ndarray]


def _policy_matrix(model: ExactModel, policy: PolicyLike) -> np.ndarray:
    """Return action probabilities of shape (S, A) for a deterministic or stochastic policy."""
    if isinstance(policy, Policy):
        probs = np.zeros(model.reward.shape)
        probs[np.arange(probs.shape[0]), policy.actions] = 1.0
        return probs
    probs = np.asarray(policy, dtype=float)
    if probs.shape != model.reward.shape:
        raise ValueError("stochastic policy must have shape (n_states, n_actions)")
    if np.any(probs[~model.feasible] > 0):
        raise ValueError("stochastic policy puts mass on infeasible actions")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("policy rows must sum to 1")
    return probs


def uniform_random_policy(model: ExactModel) -> np.ndarray:
    probs = model.feasible.astype(float)
    return probs / probs.sum(axis=1, keepdims=True)


def exact_policy_value(
    model: ExactModel, policy: PolicyLike, method: str = "direct", tol: float = 1e-10
) -> np.ndarray:
    """Solve V = R_pi + gamma * P_pi V, either directly or by fixed-point iteration."""
    probs = _policy_matrix(model, policy)
    r_pi = np.einsum("sa,sa->s", probs, np.where(model.feasible, model.reward, 0.0))
    p_pi = np.einsum("sa,sat->st", probs, model.transition)
    if method == "direct":
        n = r_pi.size
        return np.linalg.solve(np.eye(n) - model.gamma * p_pi, r_pi)
    if method == "iterative":
        values = np.zeros_like(r_pi)
        while True:
            new = r_pi + model.gamma * (p_pi @ values)
            if np.max(np.abs(new - values)) < tol * (1 - model.gamma):
                return new
            values = new
    raise ValueError(f"unknown method {method!r}")


def stationary_distribution(matrix) -> np.ndarray:
    """Solve pi P = pi with sum(pi) = 1 for an irreducible chain."""
    p = np.asarray(matrix, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("transition matrix must be square")
    if not np.allclose(p.sum(axis=1), 1.0, atol=1e-12) or np.any(p < 0):
        raise ValueError("transition matrix must be row stochastic")
    n_comp, _ = connected_components(p > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise ValueError("transition matrix is reducible; stationary law is not unique")
    n = p.shape[0]
    system = np.vstack([p.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return pi


def certify(model: ExactModel, result: ValueIterationResult, q_values: np.ndarray,
            state_weights: np.ndarray, visits: np.ndarray | None = None,
            min_visits: int = 1000, tie_tol: float = 1e-9) -> dict:
    """Compare a learned Q-table to the oracle.

    Returns the weighted fraction of states whose greedy action is optimal
    (within ``tie_tol`` of the oracle's best), and the sup-norm gap over pairs
    visited at least ``min_visits`` times relative to the oracle's sup-norm.
    """
    masked = np.where(model.feasible, q_values, -np.inf)
    learned = np.argmax(masked, axis=1)
    agree = optimal_action_sets(result.q, tie_tol)[np.arange(learned.size), learned]
    weights = np.asarray(state_weights, dtype=float)
    agreement = float(weights[agree].sum() / weights.sum()) if weights.sum() > 0 else float("nan")
    q_star = np.where(model.feasible, result.q, 0.0)
    q_sup = float(np.max(np.abs(q_star)))
    report = {"policy_agreement": agreement, "q_star_sup": q_sup}
    if visits is not None:
        sel = (visits >= min_visits) & model.feasible
        gap = float(np.max(np.abs(q_values[sel] - result.q[sel]))) if sel.any() else 0.0
        report.update(q_gap_sup=gap, q_gap_ratio=gap / q_sup if q_sup else 0.0,
                      pairs_compared=int(sel.sum()))
    return report


def dump_solution(result: ValueIterationResult, directory: str | Path) -> None:
    """Write ``values.csv``, ``policy.csv`` and ``q.csv`` (feasible pairs only)."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    config = result.policy.config
    states = enumerate_states(config)
    with open(out / "values.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "demand", "solar_level", "wind_level", "value"])
        for i, s in enumerate(states):
            writer.writerow([i, config.demand_levels[s.demand_index], s.solar_level, s.wind_level,
                             repr(float(result.values[i]))])
    with open(out / "policy.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "demand", "solar_level", "wind_level",
                         "solar_power", "wind_power", "main_power"])
        for i, s in enumerate(states):
            a = decode_action(int(result.policy.actions[i]), config)
            writer.writerow([i, config.demand_levels[s.demand_index], s.solar_level, s.wind_level, *a])
    with open(out / "q.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "action", "value"])
        for s, a in zip(*np.nonzero(np.isfinite(result.q))):
            writer.writerow([int(s), int(a), repr(float(result.q[s, a]))])
