"""The oracle suite: every acceptance criterion as rows of a pass/fail table.

Each criterion function takes a :class:`SuiteContext` and returns rows.
The context caches path bundles and keeps every reflected solution it
produced, so the structural criterion audits all of them.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .bsde import solve_bsde
from .engine import ForwardModelSpec, JumpMeasure, build_time_grid, simulate_paths
from .generators import DelayMeasure, GeneratorSpec, check_contraction
from .oracles import binomial_american
from .reflected import ObstacleSpec, solve_reflected, structural_checks
from .robust import (AmbiguitySet, compare_solutions, comparison_hypotheses, comparison_region,
                     comparison_tolerance, paired_se, robust_values, saddle_point)
from .stopping import epsilon_sandwich, optimal_times, stop_terminal, verify_optimality
from .terminal import Payoff, TerminalSpec

__all__ = ["Row", "SuiteContext", "CRITERIA", "oracle_suite", "run_criterion", "pattern"]

P_DEFAULT = 10_000
P_SNELL = 100_000
STEPS = 50
STRIKE = 100.0
S0 = 100.0
VOL = 0.2
RATE = 0.06


@dataclass
class Row:
    criterion: int
    name: str
    estimate: float
    target: float
    tolerance: float
    passed: bool
    expected: bool = True
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.passed == self.expected

    def as_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if not self.expected:
            tag += " (expected FAIL)"
        return (f"[{tag}] criterion {self.criterion}: {self.name}: estimate={self.estimate:.6g} "
                f"target={self.target:.6g} tol={self.tolerance:.3g}" + (f" ({self.detail})" if self.detail else ""))


@dataclass
class SuiteContext:
    seed: int = 0
    reflected: list = field(default_factory=list)
    _paths: dict = field(default_factory=dict)

    def paths(self, key: str, model: ForwardModelSpec, jm: JumpMeasure = JumpMeasure(), n_paths: int = P_DEFAULT,
              horizon: float = 1.0, steps: int = STEPS):
        k = (key, n_paths)
        if k not in self._paths:
            self._paths[k] = simulate_paths(model, build_time_grid(horizon, steps), jm, n_paths, self.seed)
        return self._paths[k]

    def reflect(self, label, *args, **kw):
        sol = solve_reflected(*args, **kw)
        self.reflected.append((label, sol))
        return sol


def _row(c, name, est, target, tol, passed, detail=""):
    return Row(c, name, float(est), float(target), float(tol), bool(passed), True, detail)


def _put():
    return ObstacleSpec(Payoff("put", strike=STRIKE))


def _martingale_paths(ctx):
    jm = JumpMeasure((1.0, -1.0), (1.0, 0.5))
    return ctx.paths("martingale", ForwardModelSpec(S0, 0.0, VOL, (0.1, -0.1)), jm)


def criterion_1(ctx):
    paths = _martingale_paths(ctx)
    dm = DelayMeasure.instantaneous(paths.grid)
    sol = solve_bsde(TerminalSpec(Payoff("state")), paths, GeneratorSpec("zero"), dm)
    rel = abs(sol.Y[:, 0].mean() - S0) / S0
    rms = float(np.sqrt(np.mean((sol.Y - paths.state) ** 2, axis=0)).max())
    return [
        _row(1, "martingale Y0 relative error", rel, 0.0, 0.02, rel <= 0.02, f"mean Y0={sol.Y[:, 0].mean():.4f}"),
        _row(1, "martingale max per-time RMS / s0", rms / S0, 0.0, 0.02, rms <= 0.02 * S0),
    ]


def criterion_2(ctx):
    paths = ctx.paths("gbm", ForwardModelSpec(S0, 0.0, VOL))
    dm = DelayMeasure.instantaneous(paths.grid)
    a = 0.5
    sol = solve_bsde(TerminalSpec(Payoff("constant", value=1.0)), paths, GeneratorSpec("linear-in-y", coef=a), dm)
    target = np.exp(a * paths.grid.horizon)
    rel = abs(sol.Y[:, 0].mean() - target) / target
    return [_row(2, "linear generator Y0 vs exp(aT)", sol.Y[:, 0].mean(), target, 0.01, rel <= 0.01,
                 f"relative error {rel:.2e}")]


def criterion_3(ctx):
    s0, beta, lag = 1.0, 0.3, 0.2
    paths = ctx.paths("arith", ForwardModelSpec(s0, 0.0, 1.0, dynamics="arithmetic"))
    dm = DelayMeasure(paths.grid, (lag,), (1.0,))
    sol = solve_bsde(TerminalSpec(Payoff("state")), paths, GeneratorSpec("lagged-z-constant", coef=beta), dm)
    raw = float(sol.Y[:, 0].mean())
    # E[state(T)] = s0 is known, so the sample mean of xi serves as a control variate
    est = raw - float(paths.state[:, -1].mean()) + s0
    target = s0 + beta * (paths.grid.horizon - lag)
    rel = abs(est - target) / target
    return [_row(3, "delay oracle Y0 vs s0 + beta (T - lag)", est, target, 0.01, rel <= 0.01,
                 f"raw Y0={raw:.5f}, relative error {rel:.2e}")]


def criterion_4(ctx):
    paths = ctx.paths("gbm", ForwardModelSpec(S0, 0.0, VOL))
    grid = paths.grid
    a = float(np.sqrt(0.5 / (np.e * grid.horizon * max(1.0, grid.horizon))))
    gen = GeneratorSpec("linear-in-y", coef=a)
    dm = DelayMeasure(grid, (0.2,), (1.0,))
    bound = check_contraction(gen, grid, "reflected").value
    sol = solve_bsde(TerminalSpec(Payoff("constant", value=1.0)), paths, gen, dm)
    rep = sol.report
    worst = max(rep.ratios[1:], default=0.0)
    return [
        _row(4, "configured K T e max(1,T)", bound, 0.5, 1e-12, abs(bound - 0.5) <= 1e-12),
        _row(4, "max Picard ratio after the first", worst, 0.0, 0.6, worst <= 0.6,
             "ratios " + ", ".join(f"{r:.3f}" for r in rep.ratios)),
        _row(4, "Picard iterations to tol", rep.iterations, 0, 10, rep.converged and rep.iterations <= 10),
    ]


def criterion_5(ctx):
    paths = ctx.paths("gbm", ForwardModelSpec(S0, 0.0, VOL), n_paths=P_SNELL)
    dm = DelayMeasure.instantaneous(paths.grid)
    sol = ctx.reflect("american put, f=0, P=1e5", TerminalSpec(), _put(), paths, GeneratorSpec("zero"), dm)
    tree = binomial_american(S0, STRIKE, paths.grid.horizon, VOL, 2000)
    y0 = float(sol.Y[:, 0].mean())
    rel = abs(y0 - tree) / tree
    return [_row(5, "Snell envelope Y0 vs binomial tree", y0, tree, 0.02, rel <= 0.02, f"relative error {rel:.2e}")]


def _discounted_put(ctx):
    paths = ctx.paths("gbm-drift", ForwardModelSpec(S0, RATE, VOL))
    dm = DelayMeasure.instantaneous(paths.grid)
    sol = ctx.reflect("american put, f=-rY", TerminalSpec(), _put(), paths, GeneratorSpec("linear-in-y", coef=-RATE), dm)
    return sol


def criterion_7(ctx):
    sol = _discounted_put(ctx)
    times = optimal_times(sol, 0)
    bar, star, tilde = (times[k].indices for k in ("tau_bar", "tau_star", "tau_tilde"))
    frac = float(np.mean((bar <= star) & (star <= tilde)))
    opt = verify_optimality(sol, times["tau_star"], 0)
    sub = verify_optimality(sol, stop_terminal(sol, 0), 0)
    eps = 0.01 * STRIKE
    sw = epsilon_sandwich(sol, 0, eps)
    return [
        _row(7, "fraction of paths with tau_bar <= tau_star <= tau_tilde", frac, 1.0, 0.0, frac == 1.0),
        _row(7, "tau_star optimality gap / combined SE", abs(opt.gap) / opt.se, 0.0, 3.0, opt.optimal,
             f"gap={opt.gap:.4g}, se={opt.se:.3g}"),
        _row(7, "deterministic-T stop detected as suboptimal (gap / SE)", sub.gap / sub.se, 3.0, 3.0,
             sub.gap > 3.0 * sub.se, f"gap={sub.gap:.4g}"),
        _row(7, "D^eps sandwich lower side: rho - (-Y0)", sw.rho_mean - sw.value_mean, 0.0, 3.0 * sw.se, sw.lower_ok),
        _row(7, "D^eps sandwich upper side: measured C", sw.measured_C, sw.bound_C, 3.0 * sw.se / eps, sw.upper_ok,
             f"eps={eps}, bound C={sw.bound_C:.4f}"),
    ]


def criterion_8(ctx):
    paths = ctx.paths("gbm", ForwardModelSpec(S0, 0.0, VOL))
    dm = DelayMeasure.instantaneous(paths.grid)
    g1, g2 = GeneratorSpec("scaled-abs-z", coef=0.05), GeneratorSpec("scaled-abs-z", coef=0.15)
    o1, o2 = _put(), ObstacleSpec(Payoff("put", strike=STRIKE + 1.0))
    s1 = ctx.reflect("comparison low", TerminalSpec(), o1, paths, g1, dm)
    s2 = ctx.reflect("comparison high", TerminalSpec(), o2, paths, g2, dm)
    hyp = comparison_hypotheses(s1, s2)
    region = comparison_region(s1, s2, n_band=10)
    tol = comparison_tolerance(s1, s2)
    ok = compare_solutions(s1, s2, region, tol)
    swapped = compare_solutions(s2, s1, region, tol)
    hyp_ok = hyp["terminal_ok"] and hyp["obstacle_ok"] and hyp["generator_ok"]
    return [
        _row(8, "comparison hypotheses hold on solved arguments", float(hyp_ok), 1.0, 0.0, hyp_ok),
        _row(8, "violation fraction for ordered pair", ok.fraction, 0.0, 0.0, ok.count == 0,
             f"tol={tol:.3g}, checked={ok.checked}, median sigma_bar={np.median(region.indices):.0f}"),
        _row(8, "negative control: swapped pair shows violations", swapped.fraction, 0.0, 0.0, swapped.count > 0),
    ]


def criterion_9(ctx):
    paths = ctx.paths("gbm", ForwardModelSpec(S0, 0.0, VOL))
    dm = DelayMeasure.instantaneous(paths.grid)
    obs, term = _put(), TerminalSpec()
    amb = AmbiguitySet((0.05, 0.15), GeneratorSpec("scaled-abs-z"), True)
    vals = robust_values(amb, obs, term, paths, dm)
    for d, s in vals.solutions.items():
        ctx.reflected.append((f"robust delta={d}", s))
    up, lo, ym = (float(x.mean()) for x in (vals.upper_V, vals.lower_V, vals.y_min_gen))
    se_ul = float(np.hypot(vals.se["upper_V"], vals.se["lower_V"]))
    rows = [
        _row(9, "|upper_V - lower_V|", abs(up - lo), 0.0, 3 * se_ul, abs(up - lo) <= 3 * se_ul),
        _row(9, "|y_min_gen - upper_V|", abs(ym - up), 0.0, 3 * se_ul, abs(ym - up) <= 3 * se_ul),
        _row(9, "|y_min_gen - lower_V|", abs(ym - lo), 0.0, 3 * vals.se["lower_V"], abs(ym - lo) <= 3 * vals.se["lower_V"]),
        _row(9, "sup-inf panel cross-check vs lower_V", vals.sup_inf_estimate, lo, 3 * vals.se["lower_V"],
             abs(vals.sup_inf_estimate - lo) <= 3 * vals.se["lower_V"]),
    ]
    _, dbar, cert = saddle_point(amb, obs, term, paths, dm, values=vals)
    rows.append(_row(9, "saddle certificate inequalities", float(cert.passed), 1.0, 0.0, cert.passed,
                     f"delta_bar={dbar}"))
    wrong = max(amb.deltas, key=lambda d: vals.per_delta[d].mean())
    _, _, bad = saddle_point(amb, obs, term, paths, dm, values=vals, delta_bar=wrong)
    rows.append(_row(9, "mislabeled worst case rejected by certificate", float(not bad.passed), 1.0, 0.0,
                     not bad.passed, f"forced delta_bar={wrong}"))
    single = AmbiguitySet((0.05,), GeneratorSpec("scaled-abs-z"), True)
    sv = robust_values(single, obs, term, paths, dm)
    y_single = sv.solutions[0.05].Y[:, 0]
    exact = bool(np.array_equal(sv.upper_V, sv.lower_V) and np.array_equal(sv.upper_V, y_single))
    rows.append(_row(9, "singleton family: upper_V = lower_V = Y^delta exactly",
                     float(np.max(np.abs(sv.upper_V - sv.lower_V))), 0.0, 0.0, exact))
    eta = 0.02
    net = AmbiguitySet((eta, 2 * eta), GeneratorSpec("scaled-abs-z", coef=0.1, delta_param="offset"), False,
                       infimum=GeneratorSpec("scaled-abs-z", coef=0.1))
    nv = robust_values(net, obs, term, paths, dm)
    best = min(net.deltas, key=lambda d: nv.per_delta[d].mean())
    gap = abs(float(nv.upper_V.mean()) - float(nv.y_min_gen.mean()))
    bound = net.shifted_bound(paths.grid, nv.eta) + 3 * paired_se(nv.solutions[best], nv.min_solution)
    rows.append(_row(9, "eta-net: |upper_V - Y(infimum)| <= C eta + 3 SE", gap, 0.0, bound, gap <= bound,
                     f"eta={nv.eta:.3g}"))
    return rows


def criterion_6(ctx):
    extra_grid = build_time_grid(1.0, STEPS)
    jm = JumpMeasure((1.0, -1.0), (1.0, 0.5))
    paths = ctx.paths("martingale", ForwardModelSpec(S0, 0.0, VOL, (0.1, -0.1)), jm)
    delayed = DelayMeasure(extra_grid, (0.0, 0.2), (0.5, 0.5))
    ctx.reflect("call obstacle, jumps, delayed generator", TerminalSpec(), ObstacleSpec(Payoff("call", strike=STRIKE)),
                paths, GeneratorSpec("linear-in-y", coef=0.1), delayed)
    ctx.reflect("deep out-of-the-money put", TerminalSpec(), ObstacleSpec(Payoff("put", strike=20.0)), paths,
                GeneratorSpec("zero"), DelayMeasure.instantaneous(extra_grid))
    worst = {"min_domination_gap": np.inf, "min_K_increment": np.inf, "max_abs_K0": 0.0, "skorohod_residual": 0.0}
    for _, sol in ctx.reflected:
        c = structural_checks(sol)
        worst["min_domination_gap"] = min(worst["min_domination_gap"], c["min_domination_gap"])
        worst["min_K_increment"] = min(worst["min_K_increment"], c["min_K_increment"])
        worst["max_abs_K0"] = max(worst["max_abs_K0"], c["max_abs_K0"])
        worst["skorohod_residual"] = max(worst["skorohod_residual"], c["skorohod_residual"])
    n = len(ctx.reflected)
    return [
        _row(6, f"domination min(Y - S) over {n} reflected solves", worst["min_domination_gap"], 0.0, 1e-12,
             worst["min_domination_gap"] >= -1e-12),
        _row(6, "min K increment", worst["min_K_increment"], 0.0, 0.0, worst["min_K_increment"] >= 0.0),
        _row(6, "max |K_0|", worst["max_abs_K0"], 0.0, 0.0, worst["max_abs_K0"] == 0.0),
        _row(6, "max complementarity residual", worst["skorohod_residual"], 0.0, 1e-12,
             worst["skorohod_residual"] <= 1e-12),
    ]


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def criterion_10(ctx, reference_rows=None, other_seed=None):
    """Determinism of repeated runs, and one pass/fail pattern across two seeds."""
    grid = build_time_grid(1.0, STEPS)
    jm = JumpMeasure((1.0, -1.0), (1.0, 0.5))
    model = ForwardModelSpec(S0, 0.0, VOL, (0.1, -0.1))
    digests = []
    for workers in (1, 1, 3):
        p = simulate_paths(model, grid, jm, 3000, ctx.seed, workers=workers)
        s = solve_bsde(TerminalSpec(Payoff("put", strike=STRIKE)), p, GeneratorSpec("scaled-abs-z", coef=0.1),
                       DelayMeasure(grid, (0.0, 0.1), (0.5, 0.5)))
        digests.append(_digest(p.dW, p.jumps, p.state, s.Y, s.Z, s.U))
    same = len(set(digests)) == 1
    rows = [_row(10, "repeated runs are byte-identical (incl. 3 workers)", float(same), 1.0, 0.0, same)]
    if reference_rows is not None:
        other_seed = ctx.seed + 1 if other_seed is None else other_seed
        other = oracle_suite(other_seed, include_determinism=False)
        a, b = pattern(reference_rows), pattern(other)
        rows.append(_row(10, f"pass/fail pattern identical for seeds {ctx.seed} and {other_seed}",
                         float(a == b), 1.0, 0.0, a == b))
    return rows


CRITERIA: dict = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
                  7: criterion_7, 8: criterion_8, 9: criterion_9, 6: criterion_6}


def pattern(rows) -> tuple:
    return tuple((r.criterion, r.name.split(" over ")[0], r.passed) for r in rows if r.criterion != 10)


def run_criterion(number: int, ctx: SuiteContext) -> list:
    return CRITERIA[number](ctx)


def oracle_suite(seed: int = 0, include_determinism: bool = True, negative_control: bool = False,
                 timings: dict = None) -> list:
    """Rows for criteria 1-10; criterion 6 runs last over every reflected solve.

    ``negative_control`` appends a copy of the Snell row with its tolerance
    corrupted to ``1e-9``; that row must fail.
    """
    ctx = SuiteContext(seed)
    rows = []
    for number, fn in CRITERIA.items():
        t0 = time.perf_counter()
        rows.extend(fn(ctx))
        if timings is not None:
            timings[number] = time.perf_counter() - t0
    rows.sort(key=lambda r: r.criterion)
    if include_determinism:
        t0 = time.perf_counter()
        rows.extend(criterion_10(ctx, reference_rows=rows))
        if timings is not None:
            timings[10] = time.perf_counter() - t0
    if negative_control:
        snell = next(r for r in rows if r.criterion == 5)
        tol = 1e-9
        rel = abs(snell.estimate - snell.target) / snell.target
        rows.append(Row(0, "negative control: Snell row with corrupted tolerance", snell.estimate, snell.target, tol,
                        rel <= tol, expected=False))
    return rows
