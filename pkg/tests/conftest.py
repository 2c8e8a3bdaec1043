import numpy as np
import pytest

from cabee.env import make_environment
from cabee.partitions import Partition


def matching_pennies_env(a=0.5, b=1.0, c=1.5):
    pr = np.zeros((2, 2, 3))
    pc = np.zeros((2, 2, 3))
    for g, x in enumerate((a, b, c)):
        pr[:, :, g] = [[1 + x, 0], [0, 1]]
        pc[:, :, g] = [[0, 1], [1, 0]]
    return make_environment([1 / 3] * 3, pr, pc, game_labels=("a", "b", "c"))


def dominant_env(n_games=3):
    """Row action 0 and column action 0 strictly dominant in every game."""
    pr = np.zeros((2, 2, n_games))
    pc = np.zeros((2, 2, n_games))
    for g in range(n_games):
        pr[:, :, g] = [[2 + g, 2 + g], [0, 0]]
        pc[:, :, g] = [[1, 1], [0, 0]]
    return make_environment([1.0 / n_games] * n_games, pr, pc)


def random_distributions(rng, n, k):
    draws = rng.standard_exponential((n, k))
    return draws / draws.sum(axis=1, keepdims=True)


@pytest.fixture
def mp_env():
    return matching_pennies_env()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def finest3():
    return Partition.finest(3)
