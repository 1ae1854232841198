from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bsdelab import (DelayedArgument, DelayMeasure, GeneratorSpec, InvalidConfigError, build_time_grid,
                     check_contraction, estimate_lipschitz, eval_generator, segment_view)
from bsdelab.generators import default_sampler


def _series(P=3, n=4, m=2, seed=0):
    rng = np.random.default_rng(seed)
    return SimpleNamespace(Y=rng.standard_normal((P, n + 1)), Z=rng.standard_normal((P, n)),
                           U=rng.standard_normal((P, n, m)), rates=np.array([1.0, 0.5]))


def test_zero_lag_view_is_identity():
    g = build_time_grid(1.0, 4)
    s = _series()
    arg = segment_view(s, None, 2, DelayMeasure.instantaneous(g))
    assert np.array_equal(arg.y_bar, s.Y[:, 2])
    assert np.array_equal(arg.z_bar, s.Z[:, 2])
    assert np.array_equal(arg.u_bar, s.U[:, 2])


def test_view_before_time_zero_uses_extension():
    g = build_time_grid(1.0, 4)
    s = _series()
    dm = DelayMeasure(g, (0.25, 0.5), (0.5, 0.5))
    arg = segment_view(s, 1, 0, dm)
    assert np.all(arg.y_past == s.Y[1, 0])
    assert np.all(arg.z_past == 0.0) and np.all(arg.u_past == 0.0)


def test_view_index_shift():
    g = build_time_grid(1.0, 2)
    s = SimpleNamespace(Y=np.array([[1.0, 2.0, 3.0]]), Z=np.zeros((1, 2)), U=np.zeros((1, 2, 0)))
    arg = segment_view(s, 0, 2, DelayMeasure(g, (0.5,), (1.0,)))
    assert np.array_equal(arg.y_past, [2.0])


def test_delay_measure_validation_names_type():
    g = build_time_grid(1.0, 50)
    with pytest.raises(InvalidConfigError, match="DelayMeasure"):
        DelayMeasure(g, (0.2, 0.4), (0.5, 0.6))
    with pytest.raises(InvalidConfigError, match="multiple of dt"):
        DelayMeasure(g, (0.21,), (1.0,))
    with pytest.raises(InvalidConfigError):
        DelayMeasure(g, (2.0,), (1.0,))
    with pytest.raises(InvalidConfigError):
        DelayMeasure(g, (0.2,), (-1.0,))


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6))
def test_normalized_weights_accepted(raw):
    g = build_time_grid(1.0, 10)
    w = np.asarray(raw) / np.sum(raw)
    w[-1] = 1.0 - w[:-1].sum()
    lags = tuple(0.1 * k for k in range(len(w)))
    dm = DelayMeasure(g, lags, tuple(w))
    assert abs(sum(dm.weights) - 1.0) <= 1e-12
    assert dm.offsets == tuple(range(len(w)))


def _arg(y, z=None, u=None, w=(1.0,), rates=()):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    q = y.shape[-1]
    z = np.zeros_like(y) if z is None else np.atleast_2d(np.asarray(z, dtype=float))
    u = np.zeros(y.shape + (len(rates),)) if u is None else np.asarray(u, dtype=float)
    return DelayedArgument(y, z, u, np.asarray(w[:q], dtype=float), np.asarray(rates, dtype=float))


def test_eval_examples():
    arg = _arg([[2.0]])
    assert eval_generator(GeneratorSpec("zero"), None, 0.3, arg)[0] == 0.0
    assert eval_generator(GeneratorSpec("linear-in-y", 0.5), None, 0.3, arg)[0] == pytest.approx(1.0)


def test_lagged_z_reads_zero_before_the_lag():
    # Z = 1 on [0, T); f(t) = beta * Z(t - d), which is 0 for t < d by the extension
    g = build_time_grid(1.0, 50)
    dm = DelayMeasure(g, (0.2,), (1.0,))
    s = SimpleNamespace(Y=np.zeros((1, 51)), Z=np.ones((1, 50)), U=np.zeros((1, 50, 0)), rates=np.zeros(0))
    spec = GeneratorSpec("lagged-z-constant", 0.3)
    f = np.array([eval_generator(spec, None, g.times[i], segment_view(s, 0, i, dm))[()] for i in range(50)])
    expected = 0.3 * (g.times[:50] >= 0.2 - 1e-12)
    assert np.allclose(f, expected)


def test_eval_negative_time_is_zero():
    arg = _arg([[5.0]])
    assert eval_generator(GeneratorSpec("linear-in-y", 2.0, offset=1.0), None, -0.1, arg)[0] == 0.0


def test_tabulated_and_min_kinds():
    arg = _arg([[1.0], [-1.0]], z=[[2.0], [-2.0]])
    tab = GeneratorSpec("user-tabulated", table=((0.0, 0.0), (1.0, 1.0)), coef_y=1.0, coef_z=0.5)
    assert np.allclose(eval_generator(tab, None, 0.5, arg), [0.5 + 1 + 1, 0.5 - 1 - 1])
    lo, hi = GeneratorSpec("lagged-z-constant", -0.3), GeneratorSpec("lagged-z-constant", 0.3)
    mn = GeneratorSpec("min", members=(lo, hi), lipschitz_K=0.09)
    assert np.allclose(eval_generator(mn, None, 0.1, arg), [-0.6, -0.6])


def test_contraction_examples():
    g1 = build_time_grid(1.0, 10)
    rep = check_contraction(GeneratorSpec("zero", lipschitz_K=0.01), g1, "plain")
    assert rep.value == pytest.approx(9 * 0.01 * np.e, rel=1e-12) and rep.value == pytest.approx(0.2446, abs=1e-4)
    assert rep.satisfied
    for T in (0.5, 1.0, 7.0):
        assert check_contraction(GeneratorSpec(), build_time_grid(T, 5), "plain").value == 0.0
    rep = check_contraction(GeneratorSpec("zero", lipschitz_K=1.0), g1, "reflected")
    assert rep.value == pytest.approx(np.e) and not rep.satisfied
    with pytest.raises(InvalidConfigError):
        check_contraction(GeneratorSpec(), g1, "other")


@given(st.floats(0, 2), st.floats(0, 2), st.floats(0.1, 4), st.floats(0, 3), st.sampled_from(["plain", "reflected"]))
def test_contraction_monotone(K, dK, T, dT, variant):
    a = check_contraction(GeneratorSpec(lipschitz_K=K), build_time_grid(T, 4), variant)
    b = check_contraction(GeneratorSpec(lipschitz_K=K + dK), build_time_grid(T + dT, 4), variant)
    assert b.value >= a.value
    assert not (b.satisfied and not a.satisfied)


def test_lipschitz_estimates():
    sampler = default_sampler((1.0,), ())
    assert estimate_lipschitz(GeneratorSpec(), sampler, 100).K_hat == 0.0
    est = [estimate_lipschitz(GeneratorSpec("linear-in-y", 0.7), sampler, n, seed=1).K_hat for n in (10, 10_000)]
    assert est[1] == pytest.approx(0.49, rel=1e-3)
    assert est[1] >= est[0] - 1e-12
    low = estimate_lipschitz(GeneratorSpec("linear-in-y", 0.7, lipschitz_K=0.1), sampler, 1000)
    assert low.flagged
    assert not estimate_lipschitz(GeneratorSpec("linear-in-y", 0.7), sampler, 1000).flagged


def test_analytic_constants_and_instantiate():
    assert GeneratorSpec("scaled-abs-z", 0.2).K == pytest.approx(0.04)
    spec = GeneratorSpec("scaled-abs-z", 0.2, delta_param="offset")
    assert spec.instantiate(0.05).offset == 0.05 and spec.instantiate(0.05).coef == 0.2
    assert GeneratorSpec("linear-in-y", 1.0).instantiate(None) is not None
    with pytest.raises(InvalidConfigError):
        GeneratorSpec("nonsense")
    with pytest.raises(InvalidConfigError):
        GeneratorSpec("user-tabulated", table=((0.0, 1.0),), coef_u=1.0)
