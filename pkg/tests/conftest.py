import dataclasses

import pytest

from microgrid_q.core import GridConfig
from microgrid_q.oracle import build_exact_model, value_iteration
from microgrid_q.qlearning import LearningSchedule, train


@pytest.fixture(scope="session")
def paper():
    return GridConfig()


@pytest.fixture(scope="session")
def small():
    """Tiny instance for exhaustive checks: 2 demand levels, caps (2, 1), MPA 1."""
    return GridConfig(
        demand_levels=(2, 3),
        demand_transition=((0.25, 0.75), (0.6, 0.4)),
        solar_capacity=2,
        wind_capacity=1,
        max_prod=1,
        gen_mean_solar=0.8,
        gen_mean_wind=1.3,
        gamma=0.8,
    )


@pytest.fixture(scope="session")
def paper_oracle(paper):
    model = build_exact_model(paper)
    return model, value_iteration(model, 1e-9)


@pytest.fixture(scope="session")
def convergence_runs(paper):
    """Polynomial-decay Q-learning checkpoints at 1e5, 1e6, 1e7 steps (seed 0)."""
    schedule = LearningSchedule.polynomial(1.0, 0.6)
    return {n: train(paper, schedule, 0.85, n, seed=0) for n in (10**5, 10**6, 10**7)}


def with_(config, **changes):
    return dataclasses.replace(config, **changes)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
