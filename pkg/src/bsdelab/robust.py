"""Finite ambiguity sets, comparison regions and robust stopping games.

For a family ``{f^delta}`` the robust value at ``sigma`` is

    upper V = min_delta max_tau X^{delta,psi,tau}(sigma)
    lower V = max_tau min_delta X^{delta,psi,tau}(sigma)

and both coincide with the reflected solution driven by the pointwise
minimum generator.  Everything here is estimated on one shared path
bundle, so differences of solutions are paired and their standard errors
come from pathwise cashflows.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bsde import PicardConfig, cashflows
from .errors import InvalidConfigError, UnsupportedRegimeError
from .generators import GeneratorSpec, check_contraction, default_sampler, eval_generator, segment_view
from .reflected import ObstacleSpec, ReflectedSolution, solve_reflected
from .regression import RegressionConfig
from .stopping import epsilon_optimal_time, optimal_times, risk_measure, stop_now, stop_terminal
from .terminal import StoppingField, TerminalSpec

__all__ = [
    "AmbiguitySet",
    "ComparisonRegion",
    "ViolationReport",
    "GameValues",
    "SaddleCertificate",
    "min_generator",
    "comparison_region",
    "family_region",
    "compare_solutions",
    "comparison_hypotheses",
    "comparison_tolerance",
    "paired_se",
    "robust_values",
    "saddle_point",
]

MAX_FAMILY = 8


@dataclass(frozen=True)
class AmbiguitySet:
    """``{family.instantiate(delta) : delta in deltas}``.

    ``contains_min`` asserts that one member is the pointwise minimum.  When
    it does not hold, ``infimum`` may supply the (unattained) infimum
    generator the finite family approximates.
    """

    deltas: tuple
    family: GeneratorSpec
    contains_min: bool = True
    infimum: Optional[GeneratorSpec] = None

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        if not deltas:
            raise InvalidConfigError("AmbiguitySet: deltas must be nonempty")
        if len(deltas) > MAX_FAMILY:
            raise InvalidConfigError(f"AmbiguitySet: at most {MAX_FAMILY} members are supported")
        if len(set(deltas)) != len(deltas):
            raise InvalidConfigError("AmbiguitySet: deltas must be distinct")
        object.__setattr__(self, "deltas", deltas)

    @property
    def members(self) -> list:
        return [self.family.instantiate(d) for d in self.deltas]

    def validate(self, grid) -> None:
        """Every member must satisfy the reflected contraction bound on ``grid``."""
        for d, g in zip(self.deltas, self.members):
            rep = check_contraction(g, grid, "reflected")
            if not rep.satisfied:
                raise InvalidConfigError(
                    f"AmbiguitySet: member delta={d} violates the reflected contraction bound ({rep.value:.3f} >= 1)")

    def eta(self, weights, rates, trials: int = 10_000, seed: int = 0) -> float:
        """Sampled sup-distance between the family minimum and ``infimum`` (0 without one)."""
        if self.infimum is None:
            return 0.0
        a, _ = default_sampler(weights, rates)(np.random.default_rng(seed), trials)
        return float(np.max(np.abs(eval_generator(min_generator(self), None, 0.0, a)
                                   - eval_generator(self.infimum, None, 0.0, a))))

    def shifted_bound(self, grid, eta: float) -> float:
        """``C eta`` with ``C = T exp(sqrt(K) T)``: the effect of a generator shift of ``eta``."""
        K = max(g.K for g in self.members)
        T = grid.horizon
        return float(T * np.exp(np.sqrt(K) * T) * eta)


def min_generator(amb: AmbiguitySet) -> GeneratorSpec:
    """Pointwise minimum of the family; a singleton returns its member."""
    members = amb.members
    if len(members) == 1:
        return members[0]
    return GeneratorSpec("min", members=tuple(members), lipschitz_K=max(g.K for g in members))


# -- comparison regions --------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRegion:
    indices: np.ndarray = field(repr=False)
    band: tuple
    rule_name: str = "sigma_bar"
    degenerate: bool = False

    def as_stopping_field(self) -> StoppingField:
        return StoppingField(self.indices, self.rule_name, 0)

    def summary(self) -> dict:
        idx = self.indices
        return {"rule": self.rule_name, "band": list(self.band), "degenerate": self.degenerate,
                "min": int(idx.min()), "median": float(np.median(idx)), "max": int(idx.max()),
                "mean": float(idx.mean())}


def _same_grid(a, b):
    if a.Y.shape != b.Y.shape or a.U.shape != b.U.shape:
        raise InvalidConfigError("solutions live on different grids or path sets")


def _distance_field(a, b) -> np.ndarray:
    """``max(|dY|, |dZ|, sum_j lam_j |dU_j|)`` per (path, time); ``dY`` alone at the horizon."""
    D = np.abs(a.Y - b.Y)
    dZ = np.abs(a.Z - b.Z)
    dU = np.abs(a.U - b.U) @ a.rates if a.U.shape[2] else np.zeros_like(dZ)
    D[:, :-1] = np.maximum(D[:, :-1], np.maximum(dZ, dU))
    return D


def comparison_region(solA, solB, n_band: int = 10) -> ComparisonRegion:
    """First exit of the solution distance from ``[1/n_band, n_band]``.

    The bands ``[1/n, n]`` are nested, so the supremum of their exit times
    over ``n <= n_band`` is the exit time of the widest band.  Paths that
    never exit get ``min`` of the two terminal indices.  Identical solutions
    exit at once and the region is flagged degenerate.
    """
    _same_grid(solA, solB)
    if n_band < 1:
        raise InvalidConfigError("n_band must be at least 1")
    D = _distance_field(solA, solB)
    n = D.shape[1] - 1
    last = np.minimum(solA.terminal_index, solB.terminal_index)
    within = np.arange(n + 1)[None, :] <= last[:, None]
    out = within & ((D < 1.0 / n_band) | (D > n_band))
    idx = np.where(out.any(axis=1), out.argmax(axis=1), last).astype(np.int64)
    degenerate = bool(np.all(D[within] == 0.0))
    return ComparisonRegion(idx, (1.0 / n_band, float(n_band)), "sigma_bar", degenerate)


def family_region(solutions, n_band: int = 10) -> ComparisonRegion:
    """``sigma_hat``: per-path minimum of the pairwise regions of distinct members.

    Pairs of identical solutions carry no information and are skipped; if
    every pair is identical the region is the terminal index, flagged.
    """
    solutions = list(solutions)
    if not solutions:
        raise InvalidConfigError("family_region needs at least one solution")
    idx = solutions[0].terminal_index.astype(np.int64).copy()
    for s in solutions[1:]:
        idx = np.minimum(idx, s.terminal_index)
    informative = False
    for a in range(len(solutions)):
        for b in range(a + 1, len(solutions)):
            reg = comparison_region(solutions[a], solutions[b], n_band)
            if not reg.degenerate:
                informative = True
                idx = np.minimum(idx, reg.indices)
    return ComparisonRegion(idx, (1.0 / n_band, float(n_band)), "sigma_hat", not informative)


@dataclass(frozen=True)
class ViolationReport:
    count: int
    checked: int
    fraction: float
    worst_gap: float
    tol: float

    def as_dict(self) -> dict:
        return {"count": self.count, "checked": self.checked, "fraction": self.fraction,
                "worst_gap": self.worst_gap, "tol": self.tol}


def compare_solutions(solA, solB, region: ComparisonRegion, tol: float) -> ViolationReport:
    """Count ``(path, i)`` with ``t_i <= sigma_bar`` and ``Y^A_i > Y^B_i + tol``."""
    _same_grid(solA, solB)
    n = solA.Y.shape[1] - 1
    mask = np.arange(n + 1)[None, :] <= region.indices[:, None]
    excess = np.where(mask, solA.Y - solB.Y, -np.inf)
    count = int(np.sum(excess > tol))
    checked = int(mask.sum())
    worst = float(np.max(excess)) if checked else 0.0
    return ViolationReport(count, checked, count / checked if checked else 0.0, worst, float(tol))


def _cash(sol, sigma):
    K = getattr(sol, "K", None)
    base = getattr(sol, "base", sol)
    return cashflows(base, sigma, K=K)


def paired_se(solA, solB, sigma: int = 0) -> float:
    """Standard error of ``mean Y^A(sigma) - mean Y^B(sigma)`` on shared paths."""
    d = _cash(solA, sigma) - _cash(solB, sigma)
    return float(d.std(ddof=1) / np.sqrt(d.size)) if d.size > 1 else 0.0


def comparison_tolerance(solA, solB, k: float = 3.0) -> float:
    """``k`` times the largest paired standard error over the grid."""
    n = solA.Y.shape[1] - 1
    return float(k * max(paired_se(solA, solB, i) for i in range(n + 1)))


def comparison_hypotheses(solA: ReflectedSolution, solB: ReflectedSolution, tol: float = 1e-12) -> dict:
    """Ordering of terminal values, obstacles and generators on ``A``'s solved arguments."""
    _same_grid(solA, solB)
    rows = np.arange(solA.n_paths)
    xiA = solA.Y[rows, solA.terminal_index]
    xiB = solB.Y[rows, solB.terminal_index]
    SA, SB = solA.obstacle_samples, solB.obstacle_samples
    finite = np.isfinite(SA) & np.isfinite(SB)
    gap_f = -np.inf
    stA, stB = solA.setup, solB.setup
    for i in range(solA.Y.shape[1] - 1):
        arg = segment_view(solA, None, i, stA.delay)
        t = stA.paths.grid.times[i]
        fa = eval_generator(stA.generator, stA.delta, t, arg)
        fb = eval_generator(stB.generator, stB.delta, t, arg)
        gap_f = max(gap_f, float(np.max(fa - fb)))
    worst_S = float(np.max(np.where(finite, SA - SB, -np.inf), initial=-np.inf))
    if np.any(np.isfinite(SA) & ~np.isfinite(SB)):
        worst_S = np.inf
    return {
        "terminal_ok": bool(np.max(xiA - xiB) <= tol),
        "obstacle_ok": bool(worst_S <= tol),
        "generator_ok": bool(gap_f <= tol),
        "worst_terminal_gap": float(np.max(xiA - xiB)),
        "worst_obstacle_gap": worst_S,
        "worst_generator_gap": gap_f,
    }


# -- game values ----------------------------------------------------------------

def _solve_family(amb, obstacle, term, paths, dm, rcfg, pcfg, workers):
    members = amb.members

    def job(g):
        return solve_reflected(term, obstacle, paths, g, dm, rcfg, pcfg)

    if workers > 1 and len(members) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(job, members))
    return [job(g) for g in members]


def _panel(sol: ReflectedSolution, sigma: int, epsilon: Optional[float]) -> dict:
    if epsilon is None:
        S = sol.obstacle_samples
        epsilon = 1e-2 * max(1.0, float(np.mean(np.abs(S[np.isfinite(S)])))) if np.isfinite(S).any() else 1e-2
    return {
        "D_eps": epsilon_optimal_time(sol, sigma, epsilon),
        "tau_star": optimal_times(sol, sigma)["tau_star"],
        "terminal": stop_terminal(sol, sigma),
        "now": stop_now(sol, sigma),
    }


def _plain(sol: ReflectedSolution, generator, stop: StoppingField, sigma):
    st = sol.setup
    return risk_measure(TerminalSpec(sol.obstacle.payoff_map, stop.indices), st.paths, generator, st.delay,
                        st.regression, st.picard, sigma).solution


@dataclass
class GameValues:
    sigma: int
    upper_V: np.ndarray
    lower_V: np.ndarray
    y_min_gen: np.ndarray
    per_delta: dict
    se: dict
    sup_inf_panel: dict
    region: ComparisonRegion
    eta: float = 0.0
    solutions: dict = field(default_factory=dict, repr=False)
    min_solution: Optional[ReflectedSolution] = field(default=None, repr=False)

    @property
    def u(self) -> np.ndarray:
        return -self.lower_V

    @property
    def sup_inf_estimate(self) -> float:
        return max(self.sup_inf_panel.values())

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "upper_V": float(self.upper_V.mean()),
            "lower_V": float(self.lower_V.mean()),
            "y_min_gen": float(self.y_min_gen.mean()),
            "u": float(self.u.mean()),
            "per_delta": {str(d): float(v.mean()) for d, v in self.per_delta.items()},
            "se": dict(self.se),
            "sup_inf_panel": dict(self.sup_inf_panel),
            "sup_inf_estimate": self.sup_inf_estimate,
            "eta": self.eta,
            "region": self.region.summary(),
        }


def robust_values(amb: AmbiguitySet, obstacle: ObstacleSpec, term: TerminalSpec, paths, dm,
                  rcfg: RegressionConfig = RegressionConfig(), pcfg: PicardConfig = PicardConfig(),
                  sigma: int = 0, epsilon: Optional[float] = None, workers: int = 1,
                  n_band: int = 10) -> GameValues:
    """Upper and lower game values at ``sigma``.

    ``lower_V`` is the min-generator reflected value (the generator is the
    supplied ``infimum`` when the family does not attain it); the panel of
    candidate stops gives a direct ``max_tau min_delta`` estimate beside it.
    """
    amb.validate(paths.grid)
    sols = _solve_family(amb, obstacle, term, paths, dm, rcfg, pcfg, workers)
    g_min = amb.infimum if (not amb.contains_min and amb.infimum is not None) else min_generator(amb)
    members = amb.members
    if g_min in members:
        sol_min = sols[members.index(g_min)]
    else:
        sol_min = solve_reflected(term, obstacle, paths, g_min, dm, rcfg, pcfg)

    per_delta = {d: s.Y[:, sigma].copy() for d, s in zip(amb.deltas, sols)}
    stack = np.stack(list(per_delta.values()))
    upper = stack.min(axis=0)
    y_min = sol_min.Y[:, sigma].copy()
    best = int(np.argmin(stack.mean(axis=1)))

    def se_of(s):
        c = _cash(s, sigma)
        return float(c.std(ddof=1) / np.sqrt(c.size)) if c.size > 1 else 0.0

    se = {"upper_V": se_of(sols[best]), "lower_V": se_of(sol_min), "y_min_gen": se_of(sol_min),
          "paired_upper_lower": paired_se(sols[best], sol_min, sigma)}
    se.update({f"delta={d}": se_of(s) for d, s in zip(amb.deltas, sols)})

    panel = {}
    for name, stop in _panel(sol_min, sigma, epsilon).items():
        xs = [_plain(sol_min, g, stop, sigma).Y[:, sigma] for g in members]
        panel[name] = float(np.min(np.stack(xs), axis=0).mean())

    eta = amb.eta(dm.w, paths.jump_measure.rates) if amb.infimum is not None else 0.0
    return GameValues(sigma, upper, y_min, y_min, per_delta, se, panel, family_region(sols, n_band), eta,
                      dict(zip(amb.deltas, sols)), sol_min)


@dataclass
class SaddleCertificate:
    """Pass/fail of ``X^{dbar,tau} <= X^{dbar,tau*} <= X^{delta,tau*}`` at ``k`` paired SE."""

    delta_bar: float
    left: list
    right: list
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.left) and all(r["pass"] for r in self.right)

    def as_dict(self) -> dict:
        return {"delta_bar": self.delta_bar, "tolerance_se": self.tolerance, "passed": self.passed,
                "stop_side": self.left, "scenario_side": self.right}


def _inequality(lo_sol, hi_sol, sigma, k, **labels) -> dict:
    lo = float(lo_sol.Y[:, sigma].mean())
    hi = float(hi_sol.Y[:, sigma].mean())
    se = paired_se(lo_sol, hi_sol, sigma)
    return {**labels, "lhs": lo, "rhs": hi, "se": se, "pass": bool(lo <= hi + k * se + 1e-12)}


def saddle_point(amb: AmbiguitySet, obstacle: ObstacleSpec, term: TerminalSpec, paths, dm,
                 rcfg: RegressionConfig = RegressionConfig(), pcfg: PicardConfig = PicardConfig(),
                 sigma: int = 0, tolerance: float = 3.0, delta_bar: Optional[float] = None,
                 epsilon: Optional[float] = None, values: Optional[GameValues] = None):
    """``(tau_star, delta_bar, certificate)`` for a family attaining its minimum.

    ``delta_bar`` may be forced (used to check that a wrong worst case is
    rejected).  ``values`` reuses the solves of an earlier :func:`robust_values`.
    """
    if not amb.contains_min:
        raise UnsupportedRegimeError(
            "saddle_point needs a family that attains its minimum; use robust_values with an infimum generator")
    if values is None:
        values = robust_values(amb, obstacle, term, paths, dm, rcfg, pcfg, sigma, epsilon)
    if delta_bar is None:
        delta_bar = min(amb.deltas, key=lambda d: values.per_delta[d].mean())
    elif float(delta_bar) not in amb.deltas:
        raise InvalidConfigError(f"delta_bar={delta_bar} is not in the ambiguity set")
    delta_bar = float(delta_bar)
    sol_min = values.min_solution
    tau_star = optimal_times(sol_min, sigma)["tau_star"]
    g_bar = amb.family.instantiate(delta_bar)
    x_bar_star = _plain(sol_min, g_bar, tau_star, sigma)

    left = []
    for name, stop in _panel(sol_min, sigma, epsilon).items():
        if name == "tau_star":
            continue
        left.append(_inequality(_plain(sol_min, g_bar, stop, sigma), x_bar_star, sigma, tolerance, stop=name))
    right = []
    for d in amb.deltas:
        x_d = x_bar_star if d == delta_bar else _plain(sol_min, amb.family.instantiate(d), tau_star, sigma)
        right.append(_inequality(x_bar_star, x_d, sigma, tolerance, delta=d))
    return tau_star, delta_bar, SaddleCertificate(delta_bar, left, right, tolerance)
