import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsdelab import InvalidConfigError, RegressionConfig, RegressionSingularError, regress_conditional
from bsdelab.regression import Projector


@settings(max_examples=40, deadline=None)
@given(st.floats(-1e3, 1e3), st.integers(0, 4), st.integers(1, 8), st.sampled_from([0.0, 1e-8, 1e-2]))
def test_constants_reproduced(c, degree, bins, ridge):
    x = np.random.default_rng(0).lognormal(size=500)
    fit = regress_conditional(np.full(500, c), x, RegressionConfig(degree, ridge, 100, bins))
    assert np.allclose(fit, c, atol=1e-10 * (1 + abs(c)))


@pytest.mark.parametrize("bins", [1, 8])
def test_covariate_reproduced_without_ridge(bins):
    x = np.random.default_rng(1).normal(100, 20, 2000)
    fit = regress_conditional(x, x, RegressionConfig(2, 0.0, 100, bins))
    assert np.allclose(fit, x, rtol=1e-10)


def test_quadratic_consistency():
    rng = np.random.default_rng(2)
    P, sd = 10_000, 0.5
    x = rng.normal(size=P)
    fit = regress_conditional(x**2 + sd * rng.normal(size=P), x, RegressionConfig(2, 0.0, 100, 1))
    rms = np.sqrt(np.mean((fit - x**2) ** 2))
    # three coefficients estimated: RMS error ~ sd * sqrt(3 / P)
    assert rms <= 3 * sd * np.sqrt(3 / P)


def test_projection_is_idempotent_and_linear():
    rng = np.random.default_rng(3)
    x = rng.normal(size=1000)
    p = Projector(x, 3, 1e-8, 4)
    a, b = rng.normal(size=1000), rng.normal(size=1000)
    pa = p.project(a)
    assert np.allclose(p.project(pa), pa, atol=1e-8)
    assert np.allclose(p.project(2 * a + b), 2 * pa + p.project(b))
    both = p.project(np.column_stack([a, b]))
    assert np.allclose(both[:, 0], pa)


def test_means_preserved():
    rng = np.random.default_rng(4)
    x = rng.lognormal(size=3000)
    y = np.sin(x) + rng.normal(size=3000)
    assert regress_conditional(y, x, RegressionConfig()).mean() == pytest.approx(y.mean(), abs=1e-10)


def test_constant_covariate_falls_back_to_mean():
    y = np.arange(200.0)
    fit = regress_conditional(y, np.full(200, 5.0), RegressionConfig(3, 0.0, 100, 8))
    assert np.allclose(fit, y.mean())


def test_rank_deficiency_needs_ridge():
    x = np.repeat([1.0, 2.0], 100)
    with pytest.raises(RegressionSingularError):
        regress_conditional(x, x, RegressionConfig(3, 0.0, 100, 1))
    regress_conditional(x, x, RegressionConfig(3, 1e-6, 100, 1))


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        RegressionConfig(-1)
    with pytest.raises(InvalidConfigError):
        RegressionConfig(ridge=-1.0)
    with pytest.raises(InvalidConfigError):
        RegressionConfig(n_bins=0)
    with pytest.raises(InvalidConfigError):
        regress_conditional(np.zeros(50), np.zeros(50), RegressionConfig())
