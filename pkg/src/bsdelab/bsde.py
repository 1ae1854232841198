"""Backward regression scheme for BSDEs with jumps and delayed generators.

One backward sweep maps a frozen iterate ``(Y, Z, U)`` to a new one: the
generator reads strictly lagged values from the frozen iterate and
zero-lag values from the sweep itself, and

    Z_i    = E_i[(Y_{i+1} - E_i Y_{i+1}) dW_i] / dt
    U_ij   = E_i[(Y_{i+1} - E_i Y_{i+1}) dN~_ij] / (lam_j dt)
    Y_i    = E_i[Y_{i+1}] + f(t_i, segment at t_i) dt

with ``E_i`` the regression on the forward state over paths still alive at
``t_i``.  Picard iteration of the sweep from the zero triple converges to
the fixed point whenever the sweep is a contraction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import PathBundle
from .errors import DivergedError, InvalidConfigError, NonContractionWarning
from .generators import (ContractionReport, DelayedArgument, DelayMeasure, GeneratorSpec, check_contraction,
                         eval_generator, segment_view)
from .regression import Projector, RegressionConfig
from .terminal import TerminalSpec

__all__ = [
    "PicardConfig",
    "PicardReport",
    "Setup",
    "SolutionTriple",
    "backward_sweep",
    "solve_bsde",
    "picard_distance",
    "zero_triple",
    "mean_standard_error",
]


@dataclass(frozen=True)
class PicardConfig:
    max_iters: int = 20
    tol: float = 1e-8

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidConfigError("PicardConfig: max_iters must be at least 1")
        if not self.tol >= 0:
            raise InvalidConfigError("PicardConfig: tol must be nonnegative")


@dataclass
class PicardReport:
    distances: list = field(default_factory=list)
    converged: bool = False
    contraction: Optional[ContractionReport] = None

    @property
    def iterations(self) -> int:
        return len(self.distances)

    @property
    def ratios(self) -> list:
        d = self.distances
        return [b / a if a > 0 else 0.0 for a, b in zip(d, d[1:])]

    def as_dict(self) -> dict:
        out = {"iterations": self.iterations, "converged": self.converged,
               "distances": list(map(float, self.distances)), "ratios": list(map(float, self.ratios))}
        if self.contraction is not None:
            out["contraction_bound"] = self.contraction.value
            out["contraction_satisfied"] = self.contraction.satisfied
        return out


@dataclass(frozen=True)
class Setup:
    """Everything needed to re-solve on the same paths with another terminal."""

    paths: PathBundle
    generator: GeneratorSpec
    delay: DelayMeasure
    regression: RegressionConfig = RegressionConfig()
    picard: PicardConfig = PicardConfig()
    delta: Optional[float] = None

    def with_generator(self, generator, delta=None) -> "Setup":
        return Setup(self.paths, generator, self.delay, self.regression, self.picard, delta)


@dataclass
class SolutionTriple:
    """Discrete ``(Y, Z, U)`` on paths x times (x marks).

    ``driver`` holds the generator values ``f(t_i, .)`` used in the last
    sweep (zero from each path's terminal index on).
    """

    Y: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    terminal_index: np.ndarray
    driver: np.ndarray
    rates: np.ndarray
    setup: Optional[Setup] = None
    report: Optional[PicardReport] = None

    @property
    def n_paths(self) -> int:
        return self.Y.shape[0]


def zero_triple(paths: PathBundle) -> SolutionTriple:
    P, n, m = paths.n_paths, paths.grid.steps, paths.jump_measure.m
    return SolutionTriple(np.zeros((P, n + 1)), np.zeros((P, n)), np.zeros((P, n, m)),
                          np.full(P, n, dtype=np.int64), np.zeros((P, n)), paths.jump_measure.rates)


def picard_distance(a: SolutionTriple, b: SolutionTriple, dt: float) -> float:
    """``max_i mean|dY_i|^2 + sum_i mean(|dZ_i|^2 + sum_j lam_j |dU_ij|^2) dt``."""
    dY = np.max(np.mean((a.Y - b.Y) ** 2, axis=0))
    dZ = np.mean((a.Z - b.Z) ** 2, axis=0).sum()
    dU = (np.mean((a.U - b.U) ** 2, axis=0) @ a.rates).sum() if a.U.shape[2] else 0.0
    return float(dY + (dZ + dU) * dt)


class _Sweeper:
    """Backward sweep bound to fixed paths, terminal times and obstacle.

    Projectors depend only on the state sample and the alive set, so they
    are built once and shared by every Picard iteration.
    """

    def __init__(self, paths, tau, xi, generator, delta, dm, rcfg, obstacle=None):
        self.paths, self.tau, self.xi = paths, tau, xi
        self.generator, self.delta, self.dm, self.rcfg = generator, delta, dm, rcfg
        self.obstacle = obstacle
        self.rates = paths.jump_measure.rates
        self.active_marks = np.flatnonzero(self.rates > 0)
        self.dNc = paths.compensated()
        self._projectors = {}
        self.zero_lag = [k for k, off in enumerate(dm.offsets) if off == 0]
        self.inner_max = 200

    def projector(self, i, alive):
        proj = self._projectors.get(i)
        if proj is None:
            s = self.paths.state[alive, i]
            degree = self.rcfg.basis_degree if s.size >= self.rcfg.min_paths_per_fit else 0
            proj = Projector(s, degree, self.rcfg.ridge, self.rcfg.n_bins)
            self._projectors[i] = proj
        return proj

    def _implicit_step(self, frozen, i, alive, cond, z_i, u_i):
        """Generator value and ``Y_i`` at step ``i`` on the alive paths.

        Lagged arguments are read from ``frozen``.  Zero-lag arguments use the
        current sweep: ``Z_i``, ``U_i`` are already known and ``Y_i`` solves
        ``y = cond + f(y) dt`` by fixed-point iteration (a ``dt``-scaled
        contraction).  The Picard fixed point is unaffected, and without delay
        a single sweep already solves the discrete equation.
        """
        t = self.paths.grid.times[i]
        full = segment_view(frozen, None, i, self.dm, self.rates)
        arg = DelayedArgument(full.y_past[alive], full.z_past[alive], full.u_past[alive], full.weights, full.rates)
        now = self.zero_lag
        if not now:
            f = eval_generator(self.generator, self.delta, t, arg)
            return f, cond + f * self.paths.grid.dt
        arg.z_past[:, now] = z_i[:, None]
        arg.u_past[:, now] = u_i[:, None, :]
        y = cond
        for _ in range(self.inner_max):
            arg.y_past[:, now] = y[:, None]
            f = eval_generator(self.generator, self.delta, t, arg)
            y_new = cond + f * self.paths.grid.dt
            done = np.max(np.abs(y_new - y), initial=0.0) <= 1e-15 * (1.0 + np.max(np.abs(y_new), initial=0.0))
            y = y_new
            if done:
                break
        return f, y

    def __call__(self, frozen: SolutionTriple):
        paths, grid = self.paths, self.paths.grid
        P, n, m, dt = paths.n_paths, grid.steps, paths.jump_measure.m, grid.dt
        Y = np.empty((P, n + 1))
        Z = np.zeros((P, n))
        U = np.zeros((P, n, m))
        F = np.zeros((P, n))
        dK = np.zeros((P, n)) if self.obstacle is not None else None
        Y[:, n] = self.xi
        for i in range(n - 1, -1, -1):
            alive = self.tau > i
            Y[:, i] = np.where(alive, 0.0, self.xi)
            if not alive.any():
                continue
            proj = self.projector(i, alive)
            y_next = Y[alive, i + 1]
            cond = proj.project(y_next)
            resid = y_next - cond
            cols = [resid * paths.dW[alive, i]]
            cols += [resid * self.dNc[alive, i, j] for j in self.active_marks]
            fitted = proj.project(np.column_stack(cols))
            Z[alive, i] = fitted[:, 0] / dt
            for c, j in enumerate(self.active_marks, start=1):
                U[alive, i, j] = fitted[:, c] / (self.rates[j] * dt)
            f_i, y_i = self._implicit_step(frozen, i, alive, cond, Z[alive, i], U[alive, i])
            F[alive, i] = f_i
            if self.obstacle is not None:
                pushed = np.maximum(y_i, self.obstacle[alive, i])
                dK[alive, i] = pushed - y_i
                y_i = pushed
            if not np.all(np.isfinite(y_i)) or not np.all(np.isfinite(fitted)):
                raise DivergedError(f"non-finite values in backward sweep at time index {i}", index=i)
            Y[alive, i] = y_i
        sol = SolutionTriple(Y, Z, U, self.tau, F, self.rates)
        return sol, dK


def _check_setup(paths, dm):
    if dm.grid.steps != paths.grid.steps or dm.grid.horizon != paths.grid.horizon:
        raise InvalidConfigError("delay measure and path bundle live on different grids")


def backward_sweep(frozen: SolutionTriple, term: TerminalSpec, paths: PathBundle, spec: GeneratorSpec,
                   dm: DelayMeasure, cfg: RegressionConfig, delta=None) -> SolutionTriple:
    """Apply the fixed-point map once to ``frozen``."""
    _check_setup(paths, dm)
    tau, xi = term.resolve(paths)
    sol, _ = _Sweeper(paths, tau, xi, spec, delta, dm, cfg)(frozen)
    return sol


def _picard(sweeper, paths, spec, pcfg):
    variant = "plain" if sweeper.obstacle is None else "reflected"
    report = PicardReport(contraction=check_contraction(spec.instantiate(sweeper.delta), paths.grid, variant))
    current = zero_triple(paths)
    extra = None
    for _ in range(pcfg.max_iters):
        new, extra = sweeper(current)
        report.distances.append(picard_distance(new, current, paths.grid.dt))
        current = new
        if report.distances[-1] <= pcfg.tol:
            report.converged = True
            break
    if not report.converged:
        warnings.warn(f"Picard iteration did not reach tol={pcfg.tol} in {pcfg.max_iters} iterations "
                      f"(last distance {report.distances[-1]:.3e})", NonContractionWarning, stacklevel=3)
    return current, extra, report


def solve_bsde(term: TerminalSpec, paths: PathBundle, spec: GeneratorSpec, dm: DelayMeasure,
               rcfg: RegressionConfig = RegressionConfig(), pcfg: PicardConfig = PicardConfig(),
               delta=None) -> SolutionTriple:
    """Picard iteration of :func:`backward_sweep` started at the zero triple.

    The returned solution carries the :class:`PicardReport` as ``report``.
    Non-convergence emits :class:`NonContractionWarning` rather than raising.
    """
    _check_setup(paths, dm)
    tau, xi = term.resolve(paths)
    sweeper = _Sweeper(paths, tau, xi, spec, delta, dm, rcfg)
    sol, _, report = _picard(sweeper, paths, spec, pcfg)
    sol.setup = Setup(paths, spec, dm, rcfg, pcfg, delta)
    sol.report = report
    return sol


def cashflows(sol: SolutionTriple, sigma: int, stop=None, K=None) -> np.ndarray:
    """Pathwise value ``Y[stop] + sum_{sigma<=j<stop} f_j dt + K[stop] - K[sigma]``.

    Its path mean estimates ``E[Y(sigma)]``; ``stop`` defaults to each path's
    terminal index.
    """
    P = sol.n_paths
    dt = sol.setup.paths.grid.dt if sol.setup is not None else None
    stop = sol.terminal_index if stop is None else np.asarray(stop)
    stop = np.maximum(stop, sigma)
    rows = np.arange(P)
    cum = np.concatenate([np.zeros((P, 1)), np.cumsum(sol.driver, axis=1)], axis=1) * dt
    out = sol.Y[rows, stop] + cum[rows, stop] - cum[:, sigma]
    if K is not None:
        out = out + K[rows, stop] - K[:, sigma]
    return out


def mean_standard_error(sol: SolutionTriple, sigma: int, stop=None, K=None) -> float:
    """Monte Carlo standard error of the path mean of ``Y(sigma)``."""
    c = cashflows(sol, sigma, stop, K)
    return float(c.std(ddof=1) / np.sqrt(c.size)) if c.size > 1 else 0.0
