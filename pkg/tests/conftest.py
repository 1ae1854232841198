import numpy as np
import pytest

from bsdelab import (DelayMeasure, ForwardModelSpec, GeneratorSpec, JumpMeasure, ObstacleSpec, Payoff,
                     TerminalSpec, build_time_grid, simulate_paths, solve_reflected)


@pytest.fixture(scope="session")
def grid50():
    return build_time_grid(1.0, 50)


@pytest.fixture(scope="session")
def put_paths(grid50):
    model = ForwardModelSpec(100.0, 0.0, 0.2)
    return simulate_paths(model, grid50, JumpMeasure(), 10_000, seed=11)


@pytest.fixture(scope="session")
def jump_paths(grid50):
    model = ForwardModelSpec(100.0, 0.0, 0.2, (0.1, -0.1))
    return simulate_paths(model, grid50, JumpMeasure((1.0, -1.0), (1.0, 0.5)), 10_000, seed=12)


@pytest.fixture(scope="session")
def put_solution(put_paths, grid50):
    put = Payoff("put", 100.0)
    return solve_reflected(TerminalSpec(put), ObstacleSpec(put), put_paths, GeneratorSpec(),
                           DelayMeasure.instantaneous(grid50))


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
