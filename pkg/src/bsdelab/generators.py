"""Delay measures and time-delayed generators.

A generator reads the solution through a finite delay measure
``alpha = sum_k w_k delta_{-lag_k}``.  Below time zero the solution is
extended by ``Y(t) = Y(0)``, ``Z(t) = 0``, ``U(t, .) = 0`` and the
generator itself vanishes for negative times.

Generators form a closed family so that their Lipschitz constants, in the
squared form

    |f(a) - f(b)|^2 <= K * sum_k w_k (|dy_k|^2 + |dz_k|^2 + sum_j lam_j |du_kj|^2),

are known and the contraction check is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .engine import TimeGrid
from .errors import InvalidConfigError, NumericOverflowError

KINDS = ("zero", "linear-in-y", "lagged-z-constant", "scaled-abs-z", "user-tabulated", "min")

__all__ = [
    "DelayMeasure",
    "DelayedArgument",
    "GeneratorSpec",
    "ContractionReport",
    "LipschitzEstimate",
    "segment_view",
    "eval_generator",
    "check_contraction",
    "estimate_lipschitz",
    "default_sampler",
]


@dataclass(frozen=True)
class DelayMeasure:
    """Probability measure on ``[-T, 0]`` made of point masses at grid lags."""

    grid: TimeGrid
    lags: tuple = (0.0,)
    weights: tuple = (1.0,)
    offsets: tuple = field(init=False, repr=False)

    def __post_init__(self):
        lags = tuple(float(x) for x in self.lags)
        weights = tuple(float(x) for x in self.weights)
        if not lags or len(lags) != len(weights):
            raise InvalidConfigError("DelayMeasure: lags and weights must be nonempty and of equal length")
        if any(not np.isfinite(w) or w < 0 for w in weights):
            raise InvalidConfigError("DelayMeasure: weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise InvalidConfigError(f"DelayMeasure: weights sum to {sum(weights)!r}, not 1")
        dt, T = self.grid.dt, self.grid.horizon
        offsets = []
        for lag in lags:
            if lag < 0 or lag > T * (1 + 1e-12):
                raise InvalidConfigError(f"DelayMeasure: lag {lag} outside [0, {T}]")
            k = int(round(lag / dt))
            if abs(k * dt - lag) > 1e-9 * dt:
                raise InvalidConfigError(f"DelayMeasure: lag {lag} is not a multiple of dt={dt}")
            offsets.append(k)
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "offsets", tuple(offsets))

    @classmethod
    def instantaneous(cls, grid: TimeGrid) -> "DelayMeasure":
        return cls(grid, (0.0,), (1.0,))

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights)

    @property
    def max_offset(self) -> int:
        return max(self.offsets)


@dataclass(frozen=True)
class DelayedArgument:
    """Past samples of a solution at the lags of a delay measure.

    Arrays carry arbitrary leading (path) axes: ``y_past`` and ``z_past`` are
    ``(..., q)`` and ``u_past`` is ``(..., q, m)``.
    """

    y_past: np.ndarray
    z_past: np.ndarray
    u_past: np.ndarray
    weights: np.ndarray
    rates: np.ndarray

    @property
    def y_bar(self):
        return self.y_past @ self.weights

    @property
    def z_bar(self):
        return self.z_past @ self.weights

    @property
    def u_bar(self):
        # alpha-average of U per mark, shape (..., m)
        return np.einsum("...km,k->...m", self.u_past, self.weights)


def segment_view(series, path: Optional[int], t_i: int, dm: DelayMeasure, rates=None) -> DelayedArgument:
    """Sample ``series`` (anything with ``Y``, ``Z``, ``U`` arrays) at ``t_i - lag_k``.

    ``path=None`` returns every path at once.  ``rates`` defaults to
    ``series.rates`` when the series carries them.
    """
    Y, Z, U = series.Y, series.Z, series.U
    if path is not None:
        Y, Z, U = Y[path:path + 1], Z[path:path + 1], U[path:path + 1]
    P, m = Y.shape[0], U.shape[2]
    q = len(dm.offsets)
    y = np.empty((P, q))
    z = np.zeros((P, q))
    u = np.zeros((P, q, m))
    for k, off in enumerate(dm.offsets):
        idx = t_i - off
        if idx < 0:
            y[:, k] = Y[:, 0]
            continue
        y[:, k] = Y[:, idx]
        if idx < Z.shape[1]:
            z[:, k] = Z[:, idx]
            u[:, k] = U[:, idx]
    if rates is None:
        rates = getattr(series, "rates", np.zeros(m))
    arg = DelayedArgument(y, z, u, dm.w, np.asarray(rates, dtype=float))
    if path is not None:
        arg = DelayedArgument(y[0], z[0], u[0], arg.weights, arg.rates)
    return arg


@dataclass(frozen=True)
class GeneratorSpec:
    """A member of the closed generator family.

    ``coef`` is the leading coefficient of the kind (``a`` in ``a*y``, ``beta``
    in ``beta*z``, ``c`` in ``c*|z|``) and ``offset`` an additive constant.
    ``user-tabulated`` evaluates a piecewise-linear time table plus linear
    terms ``coef_y*y + coef_z*z + coef_u*int u m(dz)``.  An ambiguity
    parameter replaces ``coef`` or ``offset`` according to ``delta_param``.
    ``lipschitz_K=None`` means: use the analytic constant of the kind.
    """

    kind: str = "zero"
    coef: float = 0.0
    offset: float = 0.0
    lipschitz_K: Optional[float] = None
    table: tuple = ()
    coef_y: float = 0.0
    coef_z: float = 0.0
    coef_u: float = 0.0
    delta_param: str = "coef"
    delta: Optional[float] = None
    members: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfigError(f"unknown generator kind {self.kind!r}")
        if self.delta_param not in ("coef", "offset"):
            raise InvalidConfigError("delta_param must be 'coef' or 'offset'")
        if self.lipschitz_K is not None and (not np.isfinite(self.lipschitz_K) or self.lipschitz_K < 0):
            raise InvalidConfigError("lipschitz_K must be a finite nonnegative number")
        if self.kind == "user-tabulated":
            table = tuple((float(t), float(v)) for t, v in self.table)
            if not table:
                raise InvalidConfigError("user-tabulated generator needs a nonempty table")
            if any(b[0] <= a[0] for a, b in zip(table, table[1:])):
                raise InvalidConfigError("generator table times must be strictly increasing")
            object.__setattr__(self, "table", table)
            if self.coef_u != 0 and self.lipschitz_K is None:
                raise InvalidConfigError("user-tabulated generator with coef_u needs a declared lipschitz_K")
        if self.kind == "min" and not self.members:
            raise InvalidConfigError("min generator needs members")

    @property
    def K(self) -> float:
        """Declared Lipschitz constant, or the analytic one for the kind."""
        if self.lipschitz_K is not None:
            return float(self.lipschitz_K)
        if self.kind == "zero":
            return 0.0
        if self.kind in ("linear-in-y", "lagged-z-constant", "scaled-abs-z"):
            return float(self.coef) * float(self.coef)
        if self.kind == "user-tabulated":
            return float(self.coef_y**2 + self.coef_z**2)
        return max(m.K for m in self.members)

    def instantiate(self, delta: Optional[float]) -> "GeneratorSpec":
        """Fix the ambiguity parameter; ``None`` returns ``self``."""
        if delta is None:
            return self
        if self.kind == "min":
            raise InvalidConfigError("a min generator has no ambiguity parameter")
        key = self.delta_param
        return replace(self, **{key: float(delta)}, delta=float(delta))


def eval_generator(spec: GeneratorSpec, delta, t: float, arg: DelayedArgument) -> np.ndarray:
    """Evaluate ``f(t, arg)`` for every leading index of ``arg``."""
    spec = spec.instantiate(delta)
    shape = np.shape(arg.y_past)[:-1]
    if t < 0 or spec.kind == "zero":
        return np.zeros(shape)
    # overflow surfaces through the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        if spec.kind == "linear-in-y":
            out = spec.coef * arg.y_bar + spec.offset
        elif spec.kind == "lagged-z-constant":
            out = spec.coef * arg.z_bar + spec.offset
        elif spec.kind == "scaled-abs-z":
            out = spec.coef * np.abs(arg.z_bar) + spec.offset
        elif spec.kind == "user-tabulated":
            ts, vs = zip(*spec.table)
            out = np.interp(t, ts, vs) + spec.offset + spec.coef_y * arg.y_bar + spec.coef_z * arg.z_bar
            if spec.coef_u:
                out = out + spec.coef_u * (arg.u_bar @ arg.rates)
        else:
            out = eval_generator(spec.members[0], None, t, arg)
            for member in spec.members[1:]:
                out = np.minimum(out, eval_generator(member, None, t, arg))
    out = np.broadcast_to(np.asarray(out, dtype=float), shape)
    if not np.all(np.isfinite(out)):
        raise NumericOverflowError(f"generator {spec.kind!r} returned a non-finite value at t={t}")
    return out


@dataclass(frozen=True)
class ContractionReport:
    value: float
    satisfied: bool
    variant: str


def check_contraction(spec: GeneratorSpec, grid: TimeGrid, variant: str = "reflected") -> ContractionReport:
    """Fixed-point contraction factor ``c*T*K*e*max(1, T)``.

    ``c = 9`` for the plain BSDE existence bound, ``c = 1`` for the reflected one.
    """
    if variant not in ("plain", "reflected"):
        raise InvalidConfigError(f"variant must be 'plain' or 'reflected', got {variant!r}")
    T = grid.horizon
    factor = 9.0 if variant == "plain" else 1.0
    value = factor * T * spec.K * np.e * max(1.0, T)
    return ContractionReport(float(value), bool(value < 1.0), variant)


def default_sampler(weights, rates, scale: float = 1.0) -> Callable:
    """Sampler drawing pairs of standard-normal delayed arguments."""
    weights = np.asarray(weights, dtype=float)
    rates = np.asarray(rates, dtype=float)
    q, m = weights.size, rates.size

    def draw(rng, n):
        def one():
            return DelayedArgument(scale * rng.standard_normal((n, q)), scale * rng.standard_normal((n, q)),
                                   scale * rng.standard_normal((n, q, m)), weights, rates)
        return one(), one()

    return draw


@dataclass(frozen=True)
class LipschitzEstimate:
    K_hat: float
    declared: float
    flagged: bool
    pairs_used: int


def estimate_lipschitz(spec: GeneratorSpec, sampler: Callable, trials: int, seed: int = 0,
                       delta=None, t: float = 0.0) -> LipschitzEstimate:
    """Empirical ``max |df|^2 / dist^2`` over sampled argument pairs.

    ``sampler(rng, n)`` returns two :class:`DelayedArgument` batches of
    ``n`` arguments each.  Pairs at zero distance are skipped.
    """
    if trials < 1:
        raise InvalidConfigError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    a, b = sampler(rng, int(trials))
    df = eval_generator(spec, delta, t, a) - eval_generator(spec, delta, t, b)
    du2 = ((a.u_past - b.u_past) ** 2) @ a.rates
    dist = ((a.y_past - b.y_past) ** 2 + (a.z_past - b.z_past) ** 2 + du2) @ a.weights
    ok = dist > 0
    K_hat = float(np.max(df[ok] ** 2 / dist[ok])) if ok.any() else 0.0
    declared = spec.instantiate(delta).K
    return LipschitzEstimate(K_hat, declared, bool(K_hat > declared * (1 + 1e-9)), int(ok.sum()))
