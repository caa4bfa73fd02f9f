import itertools

import pytest
from hypothesis import given, strategies as st

from microgrid_q.core import (
    AgentId,
    AgentView,
    ConfigError,
    GridConfig,
    InfeasibleActionError,
    JointAction,
    JointState,
    Policy,
    RewardMode,
    SynchronizationError,
    action_index,
    assemble_joint_state,
    battery_step,
    decode_action,
    decode_state,
    enumerate_states,
    feasible_actions,
    feasible_mask,
    join_action,
    reward_costaware,
    reward_deficit,
    split_action,
    state_index,
    validate_config,
)

from .conftest import with_


def test_paper_config_is_valid(paper):
    assert validate_config(paper) is paper
    assert paper.demand_levels == (8, 10, 12)


def test_row_sum_error_is_reported():
    cfg = GridConfig(demand_transition=((0.5, 0.5, 0.1), (0.3, 0.1, 0.6), (0.6, 0.3, 0.1)))
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert err.value.errors == ["row 0 sums to 1.1"]


def test_gamma_one_rejected(paper):
    with pytest.raises(ConfigError) as err:
        validate_config(with_(paper, gamma=1.0))
    assert "gamma must be < 1" in err.value.errors


def test_each_violation_reported_individually(paper):
    cfg = with_(paper, gamma=1.5, cost_weight_c=-0.1, solar_capacity=-1,
                demand_transition=((0.5, 0.6, 0.0), (0.3, 0.1, 0.6), (0.6, 0.3, 0.2)))
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    errors = err.value.errors
    assert "row 0 sums to 1.1" in errors
    assert "row 2 sums to 1.1" in errors
    assert "gamma must be < 1" in errors
    assert "cost_weight_c must be in [0, 1]" in errors
    assert "solar_capacity must be >= 0" in errors


def test_demand_levels_must_increase(paper):
    with pytest.raises(ConfigError, match="strictly increasing"):
        validate_config(with_(paper, demand_levels=(8, 8, 12)))


def test_state_count(paper):
    assert len(enumerate_states(paper)) == 108
    degenerate = GridConfig(demand_levels=(4,), demand_transition=((1.0,),),
                            solar_capacity=0, wind_capacity=0)
    assert enumerate_states(degenerate) == [JointState(0, 0, 0)]


def test_state_and_action_index_bijection(paper):
    states = enumerate_states(paper)
    assert states == sorted(states)
    for i, s in enumerate(states):
        assert state_index(s, paper) == i
        assert decode_state(i, paper) == s
    for a in range(paper.n_actions):
        assert action_index(decode_action(a, paper), paper) == a


def test_feasible_action_examples(paper):
    assert feasible_actions(JointState(0, 0, 0), with_(paper, max_prod=2)) == [
        (0, 0, 0), (0, 0, 1), (0, 0, 2)]
    assert len(feasible_actions(JointState(1, 5, 5), paper)) == 6 * 6 * 9
    assert feasible_actions(JointState(0, 1, 0), with_(paper, max_prod=0)) == [(0, 0, 0), (1, 0, 0)]


def test_feasible_count_and_order_match_mask(small):
    mask = feasible_mask(small)
    for s in enumerate_states(small):
        acts = feasible_actions(s, small)
        assert len(acts) == (s.solar_level + 1) * (s.wind_level + 1) * (small.max_prod + 1)
        idx = [action_index(a, small) for a in acts]
        assert idx == sorted(idx)
        assert set(idx) == set(mask[state_index(s, small)].nonzero()[0])


@pytest.mark.parametrize("args, expected", [((5, 3, 0, 5), 2), ((5, 0, 4, 5), 5), ((2, 2, 3, 5), 3)])
def test_battery_step_examples(args, expected):
    assert battery_step(*args) == expected


def test_battery_step_overdraw():
    with pytest.raises(InfeasibleActionError):
        battery_step(2, 3, 0, 5)


def test_battery_step_bounds_exhaustive():
    for cap in range(7):
        for level, gen in itertools.product(range(cap + 1), range(12)):
            for used in range(level + 1):
                assert 0 <= battery_step(level, used, gen, cap) <= cap


@pytest.mark.parametrize("demand, action, expected", [
    (10, (2, 0, 8), 0.0), (12, (2, 1, 8), -1.0), (8, (5, 5, 0), -4.0)])
def test_reward_deficit_examples(demand, action, expected):
    assert reward_deficit(demand, JointAction(*action)) == expected


def test_reward_costaware_examples():
    a = JointAction(1, 1, 8)
    assert reward_costaware(10, a, 0.5, RewardMode.COSTAWARE_PAPER_LITERAL) == 32.0
    assert reward_costaware(10, a, 0.5, RewardMode.COSTAWARE_PENALIZE_MAIN) == -32.0
    for mode in (RewardMode.COSTAWARE_PAPER_LITERAL, RewardMode.COSTAWARE_PENALIZE_MAIN):
        assert reward_costaware(10, JointAction(0, 0, 0), 0.0, mode) == 0.0
    with pytest.raises(ValueError):
        reward_costaware(10, a, 1.2, RewardMode.COSTAWARE_PENALIZE_MAIN)
    with pytest.raises(ValueError):
        reward_costaware(10, a, 0.5, RewardMode.DEFICIT_ONLY)


actions = st.builds(JointAction, st.integers(0, 30), st.integers(0, 30), st.integers(0, 30))


@given(st.integers(0, 60), actions)
def test_reward_deficit_nonpositive(demand, action):
    r = reward_deficit(demand, action)
    assert r <= 0
    assert (r == 0) == (action.supply == demand)


@given(st.integers(0, 60), actions, st.sampled_from(["costaware_paper_literal", "costaware_penalize_main"]))
def test_costaware_at_c_one_is_deficit_reward(demand, action, mode):
    assert reward_costaware(demand, action, 1.0, mode) == reward_deficit(demand, action)


def test_assemble_joint_state(paper):
    views = [AgentView(AgentId.SOLAR_GRID, 5, 0), AgentView(AgentId.WIND_GRID, 5, 0)]
    assert assemble_joint_state(views, paper) == JointState(0, 5, 5)
    with pytest.raises(SynchronizationError, match="disagree"):
        assemble_joint_state([AgentView("solar_grid", 5, 0), AgentView("wind_grid", 5, 1)], paper)
    with pytest.raises(SynchronizationError, match="missing agent"):
        assemble_joint_state([AgentView("solar_grid", 5, 0)], paper)
    with pytest.raises(SynchronizationError, match="duplicate"):
        assemble_joint_state([AgentView("solar_grid", 5, 0)] * 2, paper)


def test_split_action():
    assert split_action(JointAction(2, 3, 4)) == {"solar_grid": 2, "wind_grid": 3, "main": 4}
    assert split_action(JointAction(0, 0, 0)) == {"solar_grid": 0, "wind_grid": 0, "main": 0}


def test_split_join_round_trip(small):
    for s in enumerate_states(small):
        for a in feasible_actions(s, small):
            parts = split_action(a)
            assert sum(parts.values()) == a.supply
            assert join_action(parts) == a


def test_policy_must_be_total_and_feasible(small):
    states = enumerate_states(small)
    mapping = {s: JointAction(0, 0, 0) for s in states}
    assert Policy.from_mapping(small, mapping).as_dict() == mapping
    with pytest.raises(ValueError, match="not total"):
        Policy.from_mapping(small, dict(list(mapping.items())[1:]))
    bad = dict(mapping)
    bad[JointState(0, 0, 0)] = JointAction(1, 0, 0)
    with pytest.raises(InfeasibleActionError):
        Policy.from_mapping(small, bad)
