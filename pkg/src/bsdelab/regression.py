"""Least-squares estimation of conditional expectations.

Conditional means given the forward state are projections onto polynomials
of the state, fitted separately on ``n_bins`` equal-probability bins of the
sample (``n_bins=1`` is a single global polynomial).  Each bin standardizes
its covariate, and the intercept is never penalized, so constants are
reproduced exactly for any ridge value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, RegressionSingularError

__all__ = ["RegressionConfig", "Projector", "regress_conditional"]


@dataclass(frozen=True)
class RegressionConfig:
    basis_degree: int = 3
    ridge: float = 1e-8
    min_paths_per_fit: int = 100
    n_bins: int = 8

    def __post_init__(self):
        if int(self.basis_degree) != self.basis_degree or self.basis_degree < 0:
            raise InvalidConfigError("RegressionConfig: basis_degree must be a nonnegative integer")
        if not np.isfinite(self.ridge) or self.ridge < 0:
            raise InvalidConfigError("RegressionConfig: ridge must be nonnegative")
        if int(self.min_paths_per_fit) != self.min_paths_per_fit or self.min_paths_per_fit < 1:
            raise InvalidConfigError("RegressionConfig: min_paths_per_fit must be a positive integer")
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise InvalidConfigError("RegressionConfig: n_bins must be a positive integer")


class _BinFit:
    __slots__ = ("rows", "center", "scale", "degree", "gram_inv")

    def __init__(self, rows, x, degree, ridge):
        self.rows = rows
        self.center = float(x.mean())
        spread = float(x.std())
        # a constant covariate (e.g. the deterministic initial state) only spans constants
        if spread <= 1e-12 * (1.0 + abs(self.center)):
            degree, spread = 0, 1.0
        self.scale = spread
        self.degree = int(min(degree, max(x.size - 1, 0)))
        B = self.basis(x)
        if ridge > 0 and self.degree > 0:
            pen = np.sqrt(ridge * x.size) * np.eye(B.shape[1])[1:]
            R = np.linalg.qr(np.vstack([B, pen]), mode="r")
        else:
            R = np.linalg.qr(B, mode="r")
            d = np.abs(np.diag(R))
            if d.min() <= 1e-10 * d.max():
                raise RegressionSingularError(
                    f"regression design of degree {self.degree} is rank deficient; use ridge > 0")
        Rinv = np.linalg.inv(R)
        self.gram_inv = Rinv @ Rinv.T

    def basis(self, x):
        return np.vander((x - self.center) / self.scale, self.degree + 1, increasing=True)


class Projector:
    """Fitted-value operator for one covariate sample.

    Built once per time step and reused for every target regressed on the
    same paths; :meth:`project` maps targets of shape ``(P,)`` or ``(P, k)``
    to their fitted values on those paths.
    """

    def __init__(self, state, degree: int, ridge: float = 0.0, n_bins: int = 1):
        self.state = np.asarray(state, dtype=float)
        P = self.state.size
        n_bins = max(1, min(int(n_bins), P // max(degree + 1, 1)))
        if n_bins > 1:
            edges = np.unique(np.quantile(self.state, np.linspace(0.0, 1.0, n_bins + 1)[1:-1]))
            label = np.searchsorted(edges, self.state, side="right")
            groups = [np.flatnonzero(label == k) for k in range(edges.size + 1)]
            groups = [g for g in groups if g.size]
        else:
            groups = [np.arange(P)]
        self.bins = [_BinFit(g, self.state[g], degree, ridge) for g in groups]
        self._bases = [b.basis(self.state[b.rows]) for b in self.bins]

    @property
    def degree(self) -> int:
        return max(b.degree for b in self.bins)

    def project(self, targets) -> np.ndarray:
        targets = np.asarray(targets, dtype=float)
        out = np.empty_like(targets)
        for b, B in zip(self.bins, self._bases):
            t = targets[b.rows]
            out[b.rows] = B @ (b.gram_inv @ (B.T @ t))
        return out


def regress_conditional(targets, state, cfg: RegressionConfig) -> np.ndarray:
    """Fitted conditional means of ``targets`` given ``state``, per path."""
    targets = np.asarray(targets, dtype=float)
    state = np.asarray(state, dtype=float)
    if state.ndim != 1 or targets.shape[0] != state.shape[0]:
        raise InvalidConfigError("targets and state must share the leading (path) axis")
    if state.size < cfg.min_paths_per_fit:
        raise InvalidConfigError(f"need at least {cfg.min_paths_per_fit} paths, got {state.size}")
    return Projector(state, cfg.basis_degree, cfg.ridge, cfg.n_bins).project(targets)
