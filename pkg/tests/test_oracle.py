import itertools
import math

import numpy as np
import pytest
from scipy.stats import poisson

from microgrid_q.core import (
    GridConfig, JointAction, Policy, RewardMode, decode_action, decode_state, reward,
)
from microgrid_q.kernels import get_backend, kernel_model
from microgrid_q.oracle import (
    battery_kernel,
    bellman_backup,
    build_exact_model,
    certify,
    exact_policy_value,
    stationary_distribution,
    uniform_random_policy,
    value_iteration,
)
from microgrid_q.qlearning import BASELINE, evaluate_policy
from microgrid_q.rng import RngStream

from .conftest import with_


def brute_force_transition(config, s, a):
    """P(s' | s, a) by direct enumeration of generation outcomes."""
    d, sl, wl = decode_state(s, config)
    sp, wp, _ = decode_action(a, config)
    out = np.zeros(config.n_states)
    ncs, ncw = config.solar_capacity + 1, config.wind_capacity + 1
    ps = poisson.pmf(np.arange(60), config.gen_mean_solar)
    pw = poisson.pmf(np.arange(60), config.gen_mean_wind)
    for d2, p_d in enumerate(config.demand_transition[d]):
        for gs, gw in itertools.product(range(60), range(60)):
            p = p_d * ps[gs] * pw[gw]
            sl2 = min(config.solar_capacity, sl - sp + gs)
            wl2 = min(config.wind_capacity, wl - wp + gw)
            out[(d2 * ncs + sl2) * ncw + wl2] += p
    return out


def test_rows_sum_to_one(paper):
    model = build_exact_model(paper)
    sums = model.transition.sum(axis=2)
    assert np.all(np.abs(sums[model.feasible] - 1) < 1e-12)
    assert np.all(model.transition >= 0)
    assert not model.transition[~model.feasible].any()


def test_overflow_mass_lumped_at_capacity():
    k = battery_kernel(5, 2.0)
    assert k[2, 5] == pytest.approx(1 - 5 * math.exp(-2), abs=1e-15)
    assert k[2, 5] == pytest.approx(0.32332, abs=5e-6)
    assert np.allclose(k.sum(axis=1), 1, atol=1e-15)


def test_zero_generation_is_deterministic(paper):
    cfg = with_(paper, gen_mean_solar=0.0, gen_mean_wind=0.0)
    assert np.array_equal(battery_kernel(5, 0.0), np.eye(6))
    model = build_exact_model(cfg)
    s, a = 3 * 36 - 1, (4 * 6 + 2) * 9 + 5  # state (2, 5, 5), action (4, 2, 5)
    row = model.transition[s, a].reshape(3, 6, 6)
    assert row[:, 1, 3].sum() == pytest.approx(1.0)


def test_model_matches_enumeration(small):
    model = build_exact_model(small)
    for s, a in zip(*np.nonzero(model.feasible)):
        np.testing.assert_allclose(model.transition[s, a], brute_force_transition(small, s, a), atol=1e-12)


@pytest.mark.parametrize("mode", list(RewardMode))
def test_reward_table_matches_reward_function(small, mode):
    cfg = with_(small, reward_mode=mode, cost_weight_c=0.35)
    model = build_exact_model(cfg)
    for s, a in zip(*np.nonzero(model.feasible)):
        demand = cfg.demand_levels[decode_state(s, cfg).demand_index]
        assert model.reward[s, a] == reward(demand, decode_action(a, cfg), cfg)


def test_monte_carlo_matches_model_every_pair(small):
    model = build_exact_model(small)
    km = kernel_model(small)
    backend = get_backend()
    n = 100_000
    worst = 0.0
    for i, (s, a) in enumerate(zip(*np.nonzero(model.feasible))):
        counts = np.zeros(small.n_states, dtype=np.int64)
        backend.sample_transitions(km, int(s), int(a), n, RngStream(1000 + i), counts)
        tv = 0.5 * np.abs(counts / n - model.transition[s, a]).sum()
        worst = max(worst, tv)
    assert worst < 0.01


def test_gamma_zero_value_is_best_reward(paper):
    model = build_exact_model(with_(paper, gamma=0.0))
    vi = value_iteration(model)
    best = np.where(model.feasible, model.reward, -np.inf).max(axis=1)
    assert np.array_equal(vi.values, best)


def test_residual_below_tolerance(paper_oracle):
    model, vi = paper_oracle
    assert vi.residual < 1e-9
    assert np.max(np.abs(bellman_backup(model, vi.values) - vi.values)) < 1e-9


def test_bellman_optimality_and_sign(paper_oracle):
    model, vi = paper_oracle
    assert np.allclose(vi.q.max(axis=1), vi.values, atol=1e-9)
    assert np.all(vi.values <= 0)
    bound = np.abs(np.where(model.feasible, model.reward, 0)).max() / (1 - model.gamma)
    assert np.all(np.abs(vi.values) <= bound)


def test_contraction_per_sweep(paper_oracle):
    model, vi = paper_oracle
    v = np.full(model.reward.shape[0], -50.0)
    err = np.max(np.abs(v - vi.values))
    for _ in range(30):
        v = bellman_backup(model, v)
        new_err = np.max(np.abs(v - vi.values))
        assert new_err <= model.gamma * err + 1e-9
        err = new_err


def test_policy_value_of_optimal_policy(paper_oracle):
    model, vi = paper_oracle
    assert np.max(np.abs(exact_policy_value(model, vi.policy) - vi.values)) < 1e-8


def test_any_policy_dominated(paper_oracle):
    model, vi = paper_oracle
    rng = np.random.default_rng(0)
    for _ in range(5):
        acts = np.array([rng.choice(np.flatnonzero(row)) for row in model.feasible])
        v = exact_policy_value(model, Policy(model.config, acts))
        assert np.all(v <= vi.values + 1e-8)
    assert np.all(exact_policy_value(model, uniform_random_policy(model)) <= vi.values + 1e-8)


def test_random_policy_value_two_ways(paper_oracle):
    model, _ = paper_oracle
    probs = uniform_random_policy(model)
    direct = exact_policy_value(model, probs, "direct")
    iterative = exact_policy_value(model, probs, "iterative")
    assert np.max(np.abs(direct - iterative)) < 1e-9


def test_stationary_distribution(paper):
    pi = stationary_distribution(paper.transition_matrix)
    np.testing.assert_allclose(pi, [1 / 3] * 3, atol=1e-12)
    np.testing.assert_allclose(pi @ paper.transition_matrix, pi, atol=1e-12)
    np.testing.assert_allclose(stationary_distribution([[0.5, 0.5], [0.5, 0.5]]), [0.5, 0.5])
    with pytest.raises(ValueError, match="reducible"):
        stationary_distribution(np.eye(3))


def test_optimal_policy_beats_baseline(paper_oracle):
    model, vi = paper_oracle
    for seed in range(3):
        opt = evaluate_policy(vi.policy, model.config, 10_000, seed)
        base = evaluate_policy(BASELINE, model.config, 10_000, seed)
        assert opt.avg_squared_deficit <= base.avg_squared_deficit + 1e-9


def test_certify_oracle_against_itself(paper_oracle):
    model, vi = paper_oracle
    visits = np.where(model.feasible, 5000, 0)
    report = certify(model, vi, vi.q, np.ones(model.reward.shape[0]), visits)
    assert report["policy_agreement"] == 1.0
    assert report["q_gap_sup"] == 0.0
