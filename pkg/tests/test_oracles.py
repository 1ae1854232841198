import math

import pytest

from bsdelab import binomial_american


def black_scholes_put(s, k, T, vol, r=0.0):
    N = lambda x: 0.5 * (1 + math.erf(x / math.sqrt(2)))
    d1 = (math.log(s / k) + (r + vol**2 / 2) * T) / (vol * math.sqrt(T))
    d2 = d1 - vol * math.sqrt(T)
    return k * math.exp(-r * T) * N(-d2) - s * N(-d1)


def test_european_tree_matches_closed_form():
    bs = black_scholes_put(100, 100, 1.0, 0.2, 0.05)
    assert binomial_american(100, 100, 1.0, 0.2, 2000, rate=0.05, american=False) == pytest.approx(bs, abs=2e-3)


def test_zero_rate_put_has_no_early_exercise_premium():
    bs = black_scholes_put(100, 100, 1.0, 0.2)
    assert bs == pytest.approx(7.9656, abs=1e-4)
    amer = binomial_american(100, 100, 1.0, 0.2, 2000)
    assert amer == pytest.approx(7.96457, abs=1e-5)
    assert amer == pytest.approx(bs, abs=2e-3)


def test_positive_rate_premium():
    eur = binomial_american(100, 100, 1.0, 0.2, 1000, rate=0.06, american=False)
    amer = binomial_american(100, 100, 1.0, 0.2, 1000, rate=0.06)
    assert amer > eur + 0.3


def test_call_and_bad_steps():
    assert binomial_american(100, 90, 1.0, 0.2, 500, kind="call") == pytest.approx(
        binomial_american(100, 90, 1.0, 0.2, 500, kind="call", american=False))
    with pytest.raises(ValueError):
        binomial_american(100, 100, 1.0, 0.01, 1, growth=5.0)
