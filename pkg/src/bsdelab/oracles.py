"""Independent reference computations used to check the Monte Carlo solvers.

Nothing here shares code with the regression scheme.
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from .generators import DelayMeasure, GeneratorSpec, eval_generator, segment_view
from .regression import Projector

__all__ = ["binomial_american", "classical_backward_scheme"]


def binomial_american(s0, strike, horizon, vol, steps=2000, rate=0.0, growth=None, kind="put",
                      american=True) -> float:
    """Cox-Ross-Rubinstein tree price of an American (or European) option.

    ``growth`` is the drift of the underlying (defaults to ``rate``); the
    up-probability matches it while ``rate`` discounts.  Taking ``growth=0``,
    ``rate=0`` prices the plain optimal stopping of a martingale.
    """
    growth = rate if growth is None else growth
    dt = horizon / steps
    u = np.exp(vol * np.sqrt(dt))
    d = 1.0 / u
    p = (np.exp(growth * dt) - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise ValueError("tree probabilities outside (0, 1); refine steps")
    disc = np.exp(-rate * dt)
    j = np.arange(steps + 1)
    s = s0 * u ** (2 * j - steps)
    payoff = (lambda x: np.maximum(strike - x, 0.0)) if kind == "put" else (lambda x: np.maximum(x - strike, 0.0))
    v = payoff(s)
    for i in range(steps - 1, -1, -1):
        v = disc * (p * v[1:] + (1 - p) * v[:-1])
        if american:
            s = s0 * u ** (2 * np.arange(i + 1) - i)
            v = np.maximum(v, payoff(s))
    return float(v[0])


def classical_backward_scheme(paths, xi, generator: GeneratorSpec, rcfg, delta=None, inner_tol=1e-15,
                              inner_max=200):
    """Single-pass backward scheme for a generator without delay.

    At every step ``Z_i`` and ``U_i`` come from ``Y_{i+1}`` and ``Y_i`` solves
    ``y = E_i[Y_{i+1}] + f(t_i, y, Z_i, U_i) dt`` by a pathwise fixed point.
    Terminal time is the horizon on every path.  Returns ``(Y, Z, U)``.
    """
    grid, jm = paths.grid, paths.jump_measure
    P, n, m, dt = paths.n_paths, grid.steps, jm.m, grid.dt
    point = DelayMeasure.instantaneous(grid)
    rates = jm.rates
    dNc = paths.jumps - rates * dt
    Y = np.zeros((P, n + 1))
    Z = np.zeros((P, n))
    U = np.zeros((P, n, m))
    Y[:, n] = xi

    for i in range(n - 1, -1, -1):
        s = paths.state[:, i]
        proj = Projector(s, rcfg.basis_degree, rcfg.ridge, rcfg.n_bins)
        cond = proj.project(Y[:, i + 1])
        resid = Y[:, i + 1] - cond
        Z[:, i] = proj.project(resid * paths.dW[:, i]) / dt
        for j in range(m):
            if rates[j] > 0:
                U[:, i, j] = proj.project(resid * dNc[:, i, j]) / (rates[j] * dt)
        view = SimpleNamespace(Y=Y, Z=Z, U=U)
        Y[:, i] = cond
        for _ in range(inner_max):
            arg = segment_view(view, None, i, point, rates)
            y_new = cond + eval_generator(generator, delta, grid.times[i], arg) * dt
            done = np.max(np.abs(y_new - Y[:, i])) <= inner_tol * (1.0 + np.max(np.abs(y_new)))
            Y[:, i] = y_new
            if done:
                break
    return Y, Z, U
