from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest

from aggtoll.dynamics import IntegratorConfig, basin_sweep, interior_grid, run_batch
from aggtoll.game import Game, GroupProfile
from aggtoll.lyapunov import lyapunov_weights
from aggtoll.network import NetworkSpec
from aggtoll.pricing import Policy

ROOT = Path(__file__).resolve().parents[1]
EXAMPLE1 = ROOT / "scenarios" / "example1.json"

TWO_PATHS = NetworkSpec(2, ((1, 2), (1, 2)))
BRAESS = NetworkSpec(4, ((1, 2), (1, 3), (2, 4), (3, 4), (2, 3)))

Z_STAR = np.array([[0.5, 0.0], [1 / 12, 5 / 12]])
Z_STAR_EXACT = np.array([[F(1, 2), F(0)], [F(1, 12), F(5, 12)]], dtype=object)
OTHER_OPTIMUM = np.array([[0.0, 0.5], [5 / 12, 1 / 12]])
SADDLE = np.full((2, 2), 0.25)


# criterion number -> one-line PASS/FAIL summary, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])


def exact(rows):
    return np.array([[F(v) for v in row] for row in rows], dtype=object)


@pytest.fixture(scope="session")
def game():
    return Game.from_network(TWO_PATHS, GroupProfile([0.5, 0.5], [0.5, 1.5]))


@pytest.fixture(scope="session")
def game_exact():
    return Game.from_network(TWO_PATHS, GroupProfile([F(1, 2), F(1, 2)], [F(1, 2), F(3, 2)]))


@pytest.fixture(scope="session")
def toll_policy(game):
    return Policy.aggregate_toll(game, Z_STAR)


@pytest.fixture(scope="session")
def toll_policy_exact(game_exact):
    return Policy.aggregate_toll(game_exact, Z_STAR_EXACT)


@pytest.fixture(scope="session")
def weights(toll_policy, game):
    return lyapunov_weights(np.asarray(game.thetas), toll_policy)


@pytest.fixture(scope="session")
def paper_cfg():
    return IntegratorConfig(h=0.01, T=2000.0, epsilon=1e-3, tol=1e-3)


@pytest.fixture(scope="session")
def sweep_grid(game):
    return interior_grid(game.masses, 21, 1e-3)


@pytest.fixture(scope="session")
def toll_sweep(sweep_grid, toll_policy, paper_cfg, weights):
    """Full 21 x 21 sweep under the aggregate toll with Lyapunov tracking."""
    return basin_sweep(sweep_grid, toll_policy, Z_STAR, paper_cfg, weights)


@pytest.fixture(scope="session")
def pigouvian_finals(sweep_grid, game, paper_cfg):
    finals, monitor, _ = run_batch(sweep_grid, Policy.adaptive_pigouvian(game), paper_cfg)
    return finals, monitor
