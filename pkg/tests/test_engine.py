import numpy as np
import pytest
from hypothesis import given, strategies as st

from bsdelab import (CorruptedDataError, ForwardModelSpec, InvalidConfigError, JumpMeasure, build_time_grid, compensated_increment,
                     simulate_paths)


def test_grid_examples():
    assert np.allclose(build_time_grid(1.0, 4).times, [0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(build_time_grid(0.5, 1).times, [0, 0.5])
    g = build_time_grid(2.0, 100)
    assert g.dt == pytest.approx(0.02)
    assert g.times[50] == pytest.approx(1.0)
    assert g.index_of(1.0) == 50


@pytest.mark.parametrize("horizon,steps", [(0.0, 4), (-1.0, 4), (1.0, 0), (np.inf, 3)])
def test_grid_rejects_bad_input(horizon, steps):
    with pytest.raises(InvalidConfigError):
        build_time_grid(horizon, steps)


def test_index_of_off_grid():
    with pytest.raises(InvalidConfigError):
        build_time_grid(1.0, 4).index_of(0.3)


@given(st.floats(0.01, 50.0), st.integers(1, 500))
def test_grid_is_uniform(horizon, steps):
    g = build_time_grid(horizon, steps)
    assert g.times[0] == 0.0 and g.times[-1] == pytest.approx(horizon)
    assert np.allclose(np.diff(g.times), g.dt)


def test_noiseless_model_is_constant():
    g = build_time_grid(1.0, 10)
    paths = simulate_paths(ForwardModelSpec(3.0), g, JumpMeasure((1.0,), (0.0,)), 50, seed=0)
    assert np.all(paths.state == 3.0)


def test_noiseless_drift_follows_euler_ode():
    g = build_time_grid(1.0, 10)
    paths = simulate_paths(ForwardModelSpec(2.0, drift=0.1), g, JumpMeasure(), 5, seed=0)
    assert np.allclose(paths.state[0], 2.0 * 1.01 ** np.arange(11))


def test_poisson_count_mean():
    g = build_time_grid(1.0, 50)
    paths = simulate_paths(ForwardModelSpec(1.0), g, JumpMeasure((1.0,), (2.0,)), 100_000, seed=1)
    assert paths.jumps[:, :, 0].sum(axis=1).mean() == pytest.approx(2.0, abs=0.05)


def test_moments_of_increments():
    g = build_time_grid(1.0, 20)
    jm = JumpMeasure((1.0, 2.0), (1.0, 3.0))
    P = 100_000
    paths = simulate_paths(ForwardModelSpec(1.0, volatility=0.1), g, jm, P, seed=3)
    assert np.all(np.abs(paths.dW.mean(axis=0)) <= 3 * np.sqrt(g.dt / P))
    assert np.allclose(paths.dW.var(axis=0), g.dt, rtol=0.02)
    for j, lam in enumerate(jm.intensities):
        counts = paths.jumps[:, :, j]
        se = np.sqrt(lam * g.dt / P)
        assert abs(counts.mean() - lam * g.dt) <= 3 * se


def test_same_seed_bit_identical():
    g = build_time_grid(1.0, 10)
    model = ForwardModelSpec(100.0, 0.0, 0.2, (0.1,))
    jm = JumpMeasure((1.0,), (1.0,))
    a = simulate_paths(model, g, jm, 1000, seed=5)
    b = simulate_paths(model, g, jm, 1000, seed=5)
    c = simulate_paths(model, g, jm, 1000, seed=5, workers=4)
    for x in (b, c):
        assert a.state.tobytes() == x.state.tobytes()
        assert a.dW.tobytes() == x.dW.tobytes()
        assert a.jumps.tobytes() == x.jumps.tobytes()
    d = simulate_paths(model, g, jm, 1000, seed=6)
    assert a.state.tobytes() != d.state.tobytes()


def test_compensated_increment_examples():
    assert np.allclose(compensated_increment(np.array([0, 0]), JumpMeasure((1.0, 2.0), (1.0, 1.0)), 0.1),
                       [-0.1, -0.1])
    assert np.allclose(compensated_increment(np.array([3]), JumpMeasure((1.0,), (2.0,)), 0.5), [2.0])


def test_compensated_increment_is_centered():
    g = build_time_grid(1.0, 1)
    jm = JumpMeasure((1.0, -1.0), (1.5, 0.3))
    paths = simulate_paths(ForwardModelSpec(1.0), g, jm, 100_000, seed=9)
    c = paths.compensated()[:, 0, :]
    se = c.std(axis=0, ddof=1) / np.sqrt(c.shape[0])
    assert np.all(np.abs(c.mean(axis=0)) <= 3 * se)


def test_jump_measure_validation():
    with pytest.raises(InvalidConfigError):
        JumpMeasure((1.0,), (-1.0,))
    with pytest.raises(InvalidConfigError):
        JumpMeasure((1.0, 2.0), (1.0,))
    assert JumpMeasure((1.0, 2.0), (1.0, 0.5)).total_mass == pytest.approx(1.5)


def test_model_validation():
    with pytest.raises(InvalidConfigError):
        ForwardModelSpec(-1.0)
    with pytest.raises(InvalidConfigError):
        ForwardModelSpec(1.0, volatility=-0.1)
    with pytest.raises(InvalidConfigError):
        ForwardModelSpec(1.0, jump_loading=(-1.5,))
    ForwardModelSpec(-1.0, dynamics="arithmetic")


def test_martingale_state_mean():
    g = build_time_grid(1.0, 50)
    paths = simulate_paths(ForwardModelSpec(100.0, 0.0, 0.2, (0.1, -0.1)), g,
                           JumpMeasure((1.0, -1.0), (1.0, 0.5)), 50_000, seed=4)
    sT = paths.state[:, -1]
    assert abs(sT.mean() - 100.0) <= 3 * sT.std() / np.sqrt(sT.size)


def test_corrupted_counts_rejected():
    jm = JumpMeasure((1.0,), (1.0,))
    with pytest.raises(CorruptedDataError):
        compensated_increment(np.array([-1]), jm, 0.1)
    with pytest.raises(CorruptedDataError):
        compensated_increment(np.array([0.5]), jm, 0.1)
    with pytest.raises(CorruptedDataError):
        compensated_increment(np.array([1, 2]), jm, 0.1)
