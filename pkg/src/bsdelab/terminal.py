"""Payoff maps, stopping rules and terminal data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import InvalidConfigError

PAYOFF_KINDS = ("state", "constant", "put", "call", "polynomial", "none")
RULE_NAMES = ("D_eps", "tau_star", "tau_tilde", "tau_bar", "sigma_bar", "sigma_hat", "terminal", "now", "custom")

__all__ = ["Payoff", "FirstHit", "StoppingField", "TerminalSpec"]


@dataclass(frozen=True)
class Payoff:
    """Deterministic map ``(t, state) -> value``.

    ``put``/``call`` are ``(strike - s)^+`` and ``(s - strike)^+``;
    ``polynomial`` is ``sum_k coefs[k] * s**k``; ``none`` is the ``-inf``
    obstacle sentinel.
    """

    kind: str = "state"
    strike: float = 0.0
    value: float = 0.0
    coefs: tuple = ()

    def __post_init__(self):
        if self.kind not in PAYOFF_KINDS:
            raise InvalidConfigError(f"unknown payoff kind {self.kind!r}")
        object.__setattr__(self, "coefs", tuple(float(c) for c in self.coefs))
        if self.kind == "polynomial" and not self.coefs:
            raise InvalidConfigError("polynomial payoff needs coefficients")

    def __call__(self, t, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "state":
            return s.copy()
        if self.kind == "constant":
            return np.full_like(s, self.value)
        if self.kind == "put":
            return np.maximum(self.strike - s, 0.0)
        if self.kind == "call":
            return np.maximum(s - self.strike, 0.0)
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(s, self.coefs)
        return np.full_like(s, -np.inf)


@dataclass(frozen=True)
class FirstHit:
    """Stop at the first grid time the state is at or beyond ``level``."""

    level: float
    direction: str = "down"

    def __post_init__(self):
        if self.direction not in ("down", "up"):
            raise InvalidConfigError("FirstHit direction must be 'down' or 'up'")

    def indices(self, state: np.ndarray) -> np.ndarray:
        hit = state <= self.level if self.direction == "down" else state >= self.level
        n = state.shape[1] - 1
        return np.where(hit.any(axis=1), hit.argmax(axis=1), n)


@dataclass(frozen=True)
class StoppingField:
    """Per-path grid-index stopping times."""

    indices: np.ndarray = field(repr=False)
    rule_name: str = "custom"
    sigma: int = 0

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or (idx.size and idx.dtype.kind not in "iu"):
            raise InvalidConfigError("StoppingField indices must be a 1-D integer array")
        if self.rule_name not in RULE_NAMES:
            raise InvalidConfigError(f"unknown rule name {self.rule_name!r}")
        if np.any(idx < self.sigma):
            raise InvalidConfigError("StoppingField: stopping index precedes the evaluation index")
        idx = idx.astype(np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)


@dataclass(frozen=True)
class TerminalSpec:
    """Terminal time ``tau`` per path and payoff ``xi = payoff(tau, state(tau))``.

    ``stopping`` is ``None`` (deterministic horizon), a :class:`FirstHit`
    rule, a :class:`StoppingField` or a plain integer array.
    """

    payoff: Payoff = Payoff("state")
    stopping: Optional[Union[FirstHit, StoppingField, np.ndarray]] = None

    def resolve(self, paths):
        """Return ``(tau, xi)`` arrays over the paths of a bundle."""
        n, P = paths.grid.steps, paths.n_paths
        if self.stopping is None:
            tau = np.full(P, n, dtype=np.int64)
        elif isinstance(self.stopping, FirstHit):
            tau = self.stopping.indices(paths.state)
        else:
            idx = self.stopping.indices if isinstance(self.stopping, StoppingField) else self.stopping
            tau = np.asarray(idx, dtype=np.int64)
        if tau.shape != (P,) or np.any(tau < 0) or np.any(tau > n):
            raise InvalidConfigError("stopping indices must be one grid index in [0, n] per path")
        rows = np.arange(P)
        xi = self.payoff(paths.grid.times[tau], paths.state[rows, tau])
        if not np.all(np.isfinite(xi)):
            raise InvalidConfigError("terminal payoff must be finite on every path")
        return tau, xi
