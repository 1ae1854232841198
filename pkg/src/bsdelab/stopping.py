"""Risk measures, value functions and stopping times of a reflected solution.

The risk of stopping at ``tau`` is ``rho(sigma) = -X(sigma)`` where ``X``
solves the plain equation with terminal ``(tau, psi(tau))``.  The reflected
solution ``Y`` is the smallest such risk, ``v(sigma) = -Y(sigma)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bsde import PicardConfig, SolutionTriple, cashflows, solve_bsde
from .errors import InvalidConfigError
from .reflected import ReflectedSolution
from .regression import RegressionConfig
from .terminal import StoppingField, TerminalSpec

__all__ = [
    "RiskMeasure",
    "RiskReport",
    "EpsilonSandwich",
    "risk_measure",
    "value_function",
    "epsilon_optimal_time",
    "optimal_times",
    "verify_optimality",
    "epsilon_sandwich",
    "stop_now",
    "stop_terminal",
]

# equality thresholds for Y = psi (relative) and for an increase of K (absolute)
HIT_RTOL = 1e-9
K_ATOL = 1e-12


@dataclass
class RiskMeasure:
    rho: np.ndarray
    mean: float
    se: float
    solution: SolutionTriple


def _se(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0


def _check_sigma(sigma, n):
    if int(sigma) != sigma or not 0 <= sigma <= n:
        raise InvalidConfigError(f"sigma must be a grid index in [0, {n}], got {sigma!r}")
    return int(sigma)


def risk_measure(term: TerminalSpec, paths, spec, dm, rcfg: RegressionConfig = RegressionConfig(),
                 pcfg: PicardConfig = PicardConfig(), sigma: int = 0, delta=None) -> RiskMeasure:
    """Per-path ``rho^{psi,tau}(sigma) = -X(sigma)`` for the stop in ``term``."""
    sigma = _check_sigma(sigma, paths.grid.steps)
    tau, _ = term.resolve(paths)
    if np.any(tau < sigma):
        raise InvalidConfigError("risk_measure: the stopping time precedes sigma on some path")
    sol = solve_bsde(term, paths, spec, dm, rcfg, pcfg, delta)
    rho = -sol.Y[:, sigma]
    return RiskMeasure(rho, float(rho.mean()), _se(cashflows(sol, sigma)), sol)


def _resolve_at(sol: ReflectedSolution, candidate, sigma) -> RiskMeasure:
    """Risk of ``candidate`` on the setup the reflected solution was solved with."""
    st = sol.setup
    idx = candidate.indices if isinstance(candidate, StoppingField) else np.asarray(candidate, dtype=np.int64)
    term = TerminalSpec(sol.obstacle.payoff_map, idx)
    return risk_measure(term, st.paths, st.generator, st.delay, st.regression, st.picard, sigma, st.delta)


def value_function(sol: ReflectedSolution, sigma: int) -> np.ndarray:
    """``v(sigma) = -Y(sigma)`` per path."""
    sigma = _check_sigma(sigma, sol.Y.shape[1] - 1)
    return -sol.Y[:, sigma]


def _first_hit(mask: np.ndarray, sigma: int, fallback: np.ndarray) -> np.ndarray:
    """First index ``>= sigma`` where ``mask`` holds, else ``fallback``."""
    sub = mask[:, sigma:]
    hit = sub.any(axis=1)
    return np.where(hit, sigma + sub.argmax(axis=1), fallback).astype(np.int64)


def _before_terminal(sol):
    n = sol.Y.shape[1] - 1
    return np.arange(n + 1)[None, :] <= sol.terminal_index[:, None]


def epsilon_optimal_time(sol: ReflectedSolution, sigma: int, epsilon: float) -> StoppingField:
    """``D^eps``: first index ``>= sigma`` with ``Y <= S + eps`` (terminal when never)."""
    if not epsilon > 0:
        raise InvalidConfigError("epsilon must be positive")
    sigma = _check_sigma(sigma, sol.Y.shape[1] - 1)
    mask = (sol.Y <= sol.obstacle_samples + epsilon) & _before_terminal(sol)
    idx = _first_hit(mask, sigma, np.maximum(sol.terminal_index, sigma))
    return StoppingField(idx, "D_eps", sigma)


def optimal_times(sol: ReflectedSolution, sigma: int) -> dict:
    """``tau_bar <= tau_star <= tau_tilde`` from ``sigma`` on every path.

    ``tau_star`` is the first touch of the obstacle.  ``tau_tilde`` is the
    first step at which reflection pushes, i.e. the first ``i`` with
    ``K_{i+1} - K_sigma > 0``; the first ``i`` with ``K_i - K_sigma > 0`` lies
    one step after the push and is no longer optimal on the grid.
    ``tau_bar`` is ``D^eps`` at a threshold just above the touch tolerance.
    """
    n = sol.Y.shape[1] - 1
    sigma = _check_sigma(sigma, n)
    S, Y = sol.obstacle_samples, sol.Y
    term = np.maximum(sol.terminal_index, sigma)
    alive = _before_terminal(sol)
    finite_S = np.where(np.isfinite(S), np.abs(S), 0.0)
    touch = alive & (np.abs(Y - S) <= HIT_RTOL * np.maximum(1.0, finite_S))
    tau_star = _first_hit(touch, sigma, term)

    eps_bar = HIT_RTOL * max(1.0, float(np.max(finite_S, initial=0.0)))
    tau_bar = _first_hit(alive & (Y <= S + eps_bar), sigma, term)

    pushed = np.zeros_like(Y, dtype=bool)
    rise = sol.K[:, 1:] - sol.K[:, [sigma]]
    pushed[:, :-1] = rise > K_ATOL
    tau_tilde = _first_hit(pushed & alive, sigma, term)
    return {
        "tau_bar": StoppingField(tau_bar, "tau_bar", sigma),
        "tau_star": StoppingField(tau_star, "tau_star", sigma),
        "tau_tilde": StoppingField(tau_tilde, "tau_tilde", sigma),
    }


def stop_now(sol: ReflectedSolution, sigma: int) -> StoppingField:
    return StoppingField(np.full(sol.n_paths, sigma, dtype=np.int64), "now", sigma)


def stop_terminal(sol: ReflectedSolution, sigma: int) -> StoppingField:
    return StoppingField(np.maximum(sol.terminal_index, sigma).astype(np.int64), "terminal", sigma)


@dataclass
class RiskReport:
    """Risk of a candidate stop against the value function at ``sigma``.

    ``gap`` is ``mean(Y(sigma) - X(sigma))``, nonnegative up to noise, and
    ``se`` its standard error from paired pathwise cashflows.
    """

    rule_name: str
    sigma: int
    rho: np.ndarray
    value_v: np.ndarray
    gap: float
    mean_abs_gap: float
    max_abs_gap: float
    se: float
    tolerance: float

    @property
    def rho_mean(self) -> float:
        return float(self.rho.mean())

    @property
    def value_mean(self) -> float:
        return float(self.value_v.mean())

    @property
    def optimal(self) -> bool:
        """Gap within ``tolerance`` standard errors."""
        return abs(self.gap) <= self.tolerance * self.se

    @property
    def excess(self) -> bool:
        """``X(sigma)`` above ``Y(sigma)`` beyond noise, which should never happen."""
        return -self.gap > self.tolerance * self.se

    def as_dict(self) -> dict:
        return {"rule": self.rule_name, "sigma": self.sigma, "rho_mean": self.rho_mean,
                "value_mean": self.value_mean, "gap": self.gap, "mean_abs_gap": self.mean_abs_gap,
                "max_abs_gap": self.max_abs_gap, "se": self.se, "tolerance_se": self.tolerance,
                "optimal": self.optimal, "excess": self.excess}


def verify_optimality(sol: ReflectedSolution, candidate: StoppingField, sigma: int,
                      tolerance: float = 3.0) -> RiskReport:
    """Re-solve the plain equation stopped at ``candidate`` and compare with ``Y(sigma)``.

    Both path means equal the means of pathwise cashflows on the shared
    paths, so the standard error is that of the cashflow difference.
    """
    sigma = _check_sigma(sigma, sol.Y.shape[1] - 1)
    if np.any(np.asarray(candidate.indices) < sigma):
        raise InvalidConfigError("candidate stopping time precedes sigma")
    risk = _resolve_at(sol, candidate, sigma)
    x, y = -risk.rho, sol.Y[:, sigma]
    diff = y - x
    se = _se(cashflows(sol.base, sigma, K=sol.K) - cashflows(risk.solution, sigma))
    return RiskReport(candidate.rule_name, sigma, risk.rho, -y, float(diff.mean()), float(np.abs(diff).mean()),
                      float(np.abs(diff).max()), se, tolerance)


@dataclass
class EpsilonSandwich:
    """``-Y(sigma) <= rho(D^eps) <= -Y(sigma) + C eps`` up to noise."""

    epsilon: float
    value_mean: float
    rho_mean: float
    se: float
    measured_C: float
    bound_C: float
    lower_ok: bool
    upper_ok: bool
    stop: StoppingField

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "value_mean": self.value_mean, "rho_mean": self.rho_mean, "se": self.se,
                "measured_C": self.measured_C, "bound_C": self.bound_C, "lower_ok": self.lower_ok,
                "upper_ok": self.upper_ok, "passed": self.passed}


def epsilon_sandwich(sol: ReflectedSolution, sigma: int, epsilon: float, tolerance: float = 3.0,
                     bound_C: Optional[float] = None) -> EpsilonSandwich:
    """Measure the risk of ``D^eps`` and the constant it realizes.

    ``bound_C`` defaults to ``exp(sqrt(K) T)``, the Gronwall factor by which
    a terminal shift of ``eps`` can grow under a generator with Lipschitz
    constant ``sqrt(K)`` in ``y``.
    """
    stop = epsilon_optimal_time(sol, sigma, epsilon)
    rep = verify_optimality(sol, stop, sigma, tolerance)
    st = sol.setup
    if bound_C is None:
        bound_C = float(np.exp(np.sqrt(st.generator.instantiate(st.delta).K) * st.paths.grid.horizon))
    lower = rep.value_mean
    excess = rep.rho_mean - lower
    noise = tolerance * rep.se
    return EpsilonSandwich(float(epsilon), lower, rep.rho_mean, rep.se, float(excess / epsilon), bound_C,
                           bool(excess >= -noise), bool(excess <= bound_C * epsilon + noise), stop)
