"""Reflected BSDEs with jumps and delayed generators.

Each backward step pushes the unconstrained estimate up to the obstacle,
``Y_i = max(Y~_i, S_i)``, and books the push as ``K_{i+1} - K_i``.  The
pointwise maximum makes the discrete Skorohod condition
``sum_i (Y_i - S_i)(K_{i+1} - K_i) = 0`` hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bsde import PicardConfig, Setup, SolutionTriple, _check_setup, _picard, _Sweeper
from .engine import PathBundle
from .errors import InvalidConfigError
from .generators import DelayMeasure, GeneratorSpec
from .regression import RegressionConfig
from .terminal import Payoff, TerminalSpec

__all__ = ["ObstacleSpec", "ReflectedSolution", "SkorohodReport", "solve_reflected", "skorohod_residual",
           "structural_checks"]


@dataclass(frozen=True)
class ObstacleSpec:
    """Obstacle ``S(t) = payoff_map(t, state(t))``.

    With ``terminal_link`` the terminal value is the obstacle itself,
    ``xi = S(tau)``; otherwise the terminal payoff must dominate it.
    """

    payoff_map: Payoff = Payoff("none")
    terminal_link: bool = True

    def sample(self, paths: PathBundle) -> np.ndarray:
        return self.payoff_map(paths.grid.times[None, :], paths.state)


@dataclass
class ReflectedSolution:
    base: SolutionTriple
    K: np.ndarray
    obstacle_samples: np.ndarray
    obstacle: ObstacleSpec
    terminal: TerminalSpec

    @property
    def Y(self):
        return self.base.Y

    @property
    def Z(self):
        return self.base.Z

    @property
    def U(self):
        return self.base.U

    @property
    def driver(self):
        return self.base.driver

    @property
    def terminal_index(self):
        return self.base.terminal_index

    @property
    def setup(self) -> Setup:
        return self.base.setup

    @property
    def report(self):
        return self.base.report

    @property
    def rates(self):
        return self.base.rates

    @property
    def n_paths(self):
        return self.base.n_paths

    @property
    def dK(self) -> np.ndarray:
        return np.diff(self.K, axis=1)

    def psi(self, t_index) -> np.ndarray:
        """Obstacle value at per-path grid indices."""
        t_index = np.broadcast_to(np.asarray(t_index), (self.n_paths,))
        return self.obstacle_samples[np.arange(self.n_paths), t_index]


def solve_reflected(term: TerminalSpec, obstacle: ObstacleSpec, paths: PathBundle, spec: GeneratorSpec,
                    dm: DelayMeasure, rcfg: RegressionConfig = RegressionConfig(),
                    pcfg: PicardConfig = PicardConfig(), delta=None) -> ReflectedSolution:
    """Picard iteration of the reflected backward sweep.

    ``term`` supplies the terminal times; with ``obstacle.terminal_link`` its
    payoff is replaced by the obstacle.
    """
    _check_setup(paths, dm)
    S = obstacle.sample(paths)
    if obstacle.terminal_link:
        term = TerminalSpec(obstacle.payoff_map, term.stopping)
        if obstacle.payoff_map.kind == "none":
            raise InvalidConfigError("terminal_link needs a finite obstacle")
    tau, xi = term.resolve(paths)
    rows = np.arange(paths.n_paths)
    if np.any(xi < S[rows, tau] - 1e-12):
        raise InvalidConfigError("terminal value lies below the obstacle at the terminal time")
    if not np.isfinite(np.mean(np.maximum(S, 0.0) ** 2)):
        raise InvalidConfigError("obstacle positive part has no finite second moment")

    sweeper = _Sweeper(paths, tau, xi, spec, delta, dm, rcfg, obstacle=S)
    base, dK, report = _picard(sweeper, paths, spec, pcfg)
    base.setup = Setup(paths, spec, dm, rcfg, pcfg, delta)
    base.report = report
    K = np.zeros_like(base.Y)
    np.cumsum(dK, axis=1, out=K[:, 1:])
    return ReflectedSolution(base, K, S, obstacle, term)


@dataclass(frozen=True)
class SkorohodReport:
    per_path: np.ndarray
    aggregate: float
    flagged: bool


def skorohod_residual(sol, tol: float = 1e-12) -> SkorohodReport:
    """``sum_i (Y_i - S_i)(K_{i+1} - K_i)`` per path and its mean."""
    dK = np.diff(sol.K, axis=1)
    gap = sol.Y[:, :-1] - sol.obstacle_samples[:, :-1]
    terms = np.where(dK != 0, gap * dK, 0.0)
    per_path = terms.sum(axis=1)
    agg = float(per_path.mean())
    return SkorohodReport(per_path, agg, bool(np.max(np.abs(per_path), initial=0.0) > tol))


def structural_checks(sol: ReflectedSolution) -> dict:
    """Domination, monotonicity of ``K`` and complementarity, as numbers."""
    n = sol.Y.shape[1] - 1
    upto_tau = np.arange(n + 1)[None, :] <= sol.terminal_index[:, None]
    gap = np.where(upto_tau, sol.Y - sol.obstacle_samples, np.inf)
    dK = np.diff(sol.K, axis=1)
    return {
        "min_domination_gap": float(np.min(gap)),
        "min_K_increment": float(np.min(dK, initial=0.0)),
        "max_abs_K0": float(np.max(np.abs(sol.K[:, 0]))),
        "skorohod_residual": float(np.max(np.abs(skorohod_residual(sol).per_path), initial=0.0)),
    }
