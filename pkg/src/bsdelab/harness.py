"""Scenario orchestration and result persistence.

``run_scenario`` executes one subcommand pipeline and writes its outputs
into ``<out>/<digest>-seed<seed>/``, first into a hidden temporary
directory that is renamed into place only once every file is written.
All files except ``timing.json`` are byte-deterministic for a fixed
config and seed.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .bsde import solve_bsde
from .config import ScenarioConfig
from .engine import simulate_paths
from .errors import InvalidConfigError, NonContractionWarning
from .oracles import binomial_american
from .reflected import solve_reflected, structural_checks
from .robust import AmbiguitySet, paired_se, robust_values, saddle_point
from .stopping import (epsilon_optimal_time, epsilon_sandwich, optimal_times, stop_now, stop_terminal,
                       verify_optimality)
from .suite import oracle_suite

__all__ = ["SUBCOMMANDS", "RULES", "EXIT_OK", "EXIT_INVARIANT", "EXIT_NONCONVERGED", "RunReport", "run_scenario",
           "run_digest", "run_verify", "write_csv"]

SUBCOMMANDS = ("solve", "reflect", "stop", "robust", "verify")
RULES = ("d_eps", "tau_star", "tau_tilde", "tau_bar", "now", "terminal")
EXIT_OK, EXIT_INVARIANT, EXIT_NONCONVERGED = 0, 2, 3


@dataclass
class RunReport:
    subcommand: str
    digest: str
    seed: int
    out_dir: Optional[Path] = None
    outputs: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    picard: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    oracles: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    nonconverged: int = 0

    @property
    def exit_code(self) -> int:
        if self.nonconverged:
            return EXIT_NONCONVERGED
        if not all(self.checks.values()):
            return EXIT_INVARIANT
        return EXIT_OK

    def as_dict(self) -> dict:
        return {"subcommand": self.subcommand, "digest": self.digest, "seed": self.seed,
                "outputs": sorted(self.outputs), "picard": self.picard, "checks": self.checks,
                "oracles": self.oracles, "summary": self.summary, "nonconverged_solves": self.nonconverged,
                "exit_code": self.exit_code}


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path: Path, columns: dict) -> None:
    """Write equal-length columns with a header row, floats in round-trip precision."""
    names = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in names]
    n = cols[0].size if cols else 0
    if any(c.size != n for c in cols):
        raise ValueError("CSV columns must have equal length")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(c[i].item()) for c in cols) + "\n")


def _grid_columns(prefix: str, arr: np.ndarray, times) -> dict:
    cols = {"path": np.arange(arr.shape[0])}
    for i in range(arr.shape[1]):
        cols[f"{prefix}_t{i}"] = arr[:, i]
    return cols


def _json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


class _Writer:
    def __init__(self, tmp: Path, report: RunReport):
        self.tmp, self.report = tmp, report

    def csv(self, name, columns):
        write_csv(self.tmp / name, columns)
        self.report.outputs.append(name)

    def json(self, name, obj):
        _json(self.tmp / name, obj)
        self.report.outputs.append(name)


def _tree_oracle(cfg: ScenarioConfig) -> Optional[float]:
    """Binomial-tree price when the scenario is a discounted American put or call."""
    m, jm, g, ob = cfg.model, cfg.jump_measure, cfg.generator, cfg.obstacle
    if ob is None or ob.payoff_map.kind not in ("put", "call") or not ob.terminal_link:
        return None
    if m.dynamics != "geometric" or jm.total_mass > 0 or cfg.terminal.stopping is not None:
        return None
    if cfg.delay.offsets != (0,):
        return None
    if g.kind == "zero":
        rate = 0.0
    elif g.kind == "linear-in-y" and g.offset == 0 and g.coef <= 0:
        rate = -g.coef
    else:
        return None
    try:
        return binomial_american(m.initial, ob.payoff_map.strike, cfg.grid.horizon, m.volatility, 2000, rate=rate,
                                 growth=m.drift, kind=ob.payoff_map.kind)
    except ValueError:
        return None


def _structural(report: RunReport, sol, prefix=""):
    c = structural_checks(sol)
    report.checks[prefix + "domination"] = c["min_domination_gap"] >= -1e-12
    report.checks[prefix + "K_nondecreasing"] = c["min_K_increment"] >= 0.0
    report.checks[prefix + "K0_zero"] = c["max_abs_K0"] == 0.0
    report.checks[prefix + "skorohod"] = c["skorohod_residual"] <= 1e-12
    report.summary[prefix + "structural"] = c


def _write_solution(w: _Writer, sol, times, reflected=False):
    w.csv("Y.csv", _grid_columns("Y", sol.Y, times))
    w.csv("Z.csv", _grid_columns("Z", sol.Z, times))
    for j in range(sol.U.shape[2]):
        w.csv(f"U_mark{j}.csv", _grid_columns("U", sol.U[:, :, j], times))
    if reflected:
        w.csv("K.csv", _grid_columns("K", sol.K, times))


def _solve(cfg, paths, w, report):
    sol = solve_bsde(cfg.terminal, paths, cfg.generator, cfg.delay, cfg.regression, cfg.picard)
    report.picard.append(sol.report.as_dict())
    tau, xi = cfg.terminal.resolve(paths)
    rows = np.arange(paths.n_paths)
    report.checks["finite"] = bool(np.all(np.isfinite(sol.Y)))
    report.checks["terminal_consistency"] = bool(np.array_equal(sol.Y[rows, tau], xi))
    y0 = float(sol.Y[:, 0].mean())
    se = float(xi.std(ddof=1) / np.sqrt(xi.size)) if xi.size > 1 else 0.0
    report.summary.update({"Y0_mean": y0, "xi_mean": float(xi.mean()), "xi_se": se})
    if cfg.generator.kind == "zero":
        report.oracles["tower_property"] = {"Y0_mean": y0, "xi_mean": float(xi.mean()), "se": se,
                                            "pass": abs(y0 - xi.mean()) <= 3 * se + 1e-12}
        if cfg.model.drift == 0 and cfg.terminal.payoff.kind == "state":
            s0 = cfg.model.initial
            report.oracles["martingale"] = {"Y0_mean": y0, "s0": s0, "se": se,
                                            "pass": abs(y0 - s0) <= max(3 * se, 1e-12 * s0)}
    _write_solution(w, sol, paths.grid.times)
    w.json("summary.json", {"Y0_mean": y0, "picard": sol.report.as_dict(), "oracles": report.oracles})
    return sol


def _reflect(cfg, paths, w, report, write=True):
    if cfg.obstacle is None:
        raise InvalidConfigError("[obstacle] this subcommand needs an obstacle section")
    sol = solve_reflected(cfg.terminal, cfg.obstacle, paths, cfg.generator, cfg.delay, cfg.regression, cfg.picard)
    report.picard.append(sol.report.as_dict())
    _structural(report, sol)
    y0 = float(sol.Y[:, 0].mean())
    report.summary["Y0_mean"] = y0
    tree = _tree_oracle(cfg)
    if tree is not None:
        rel = abs(y0 - tree) / tree
        report.oracles["binomial_tree"] = {"Y0_mean": y0, "tree": tree, "relative_error": rel, "pass": rel <= 0.02}
    if write:
        _write_solution(w, sol, paths.grid.times, reflected=True)
        w.json("summary.json", {"Y0_mean": y0, "picard": sol.report.as_dict(), "oracles": report.oracles,
                                "structural": report.summary["structural"]})
    return sol


def _stop(cfg, paths, w, report, rule, sigma, epsilon):
    sol = _reflect(cfg, paths, w, report, write=False)
    times = optimal_times(sol, sigma)
    bar, star, tilde = (times[k].indices for k in ("tau_bar", "tau_star", "tau_tilde"))
    report.checks["stopping_order"] = bool(np.all((bar <= star) & (star <= tilde)))
    if rule == "d_eps":
        stop = epsilon_optimal_time(sol, sigma, epsilon)
    elif rule in ("tau_star", "tau_tilde", "tau_bar"):
        stop = times[rule]
    elif rule == "now":
        stop = stop_now(sol, sigma)
    elif rule == "terminal":
        stop = stop_terminal(sol, sigma)
    else:
        raise InvalidConfigError(f"unknown rule {rule!r}; choose from {', '.join(RULES)}")
    rep = verify_optimality(sol, stop, sigma)
    report.checks["no_excess_over_value"] = not rep.excess
    gap = rep.as_dict()
    if rule == "d_eps":
        gap["sandwich"] = epsilon_sandwich(sol, sigma, epsilon).as_dict()
    grid = paths.grid
    w.csv("stops.csv", {"path": np.arange(paths.n_paths), "rule": np.full(paths.n_paths, stop.rule_name),
                        "sigma_index": np.full(paths.n_paths, sigma), "stop_index": stop.indices,
                        "stop_time": grid.times[stop.indices]})
    w.json("gap_report.json", gap)
    report.summary.update({"rule": rule, "sigma_index": sigma, "gap": rep.gap, "se": rep.se})
    return sol


def _ambiguity(cfg, deltas, family) -> AmbiguitySet:
    amb = cfg.ambiguity
    base = cfg.generator if family is None else replace(cfg.generator, kind=family)
    if deltas is not None:
        return AmbiguitySet(tuple(deltas), base, amb.contains_min if amb else True, amb.infimum if amb else None)
    if amb is None:
        raise InvalidConfigError("[generator] robust needs generator.deltas or --deltas")
    return AmbiguitySet(amb.deltas, base, amb.contains_min, amb.infimum)


def _robust(cfg, paths, w, report, sigma, epsilon, deltas, family):
    if cfg.obstacle is None:
        raise InvalidConfigError("[obstacle] robust needs an obstacle section")
    amb = _ambiguity(cfg, deltas, family)
    vals = robust_values(amb, cfg.obstacle, cfg.terminal, paths, cfg.delay, cfg.regression, cfg.picard, sigma,
                         epsilon, workers=cfg.run.workers)
    for d, s in vals.solutions.items():
        report.picard.append({"delta": d, **s.report.as_dict()})
        _structural(report, s, prefix=f"delta={d}:")
    if not any(s is vals.min_solution for s in vals.solutions.values()):
        report.picard.append({"delta": "min", **vals.min_solution.report.as_dict()})
        _structural(report, vals.min_solution, prefix="min:")
    up, lo = float(vals.upper_V.mean()), float(vals.lower_V.mean())
    se = float(np.hypot(vals.se["upper_V"], vals.se["lower_V"]))
    report.checks["weak_duality"] = lo <= up + 3 * se
    cols = {"path": np.arange(paths.n_paths), "upper_V": vals.upper_V, "lower_V": vals.lower_V,
            "y_min_gen": vals.y_min_gen, "u": vals.u}
    for d, v in vals.per_delta.items():
        cols[f"Y_delta={d!r}"] = v
    cols["sigma_hat_index"] = vals.region.indices
    w.csv("game_values.csv", cols)
    if amb.contains_min:
        _, _, cert = saddle_point(amb, cfg.obstacle, cfg.terminal, paths, cfg.delay, cfg.regression,
                                  cfg.picard, sigma, values=vals, epsilon=epsilon)
        cert_doc = {"regime": "attained-minimum", **cert.as_dict()}
        report.checks["saddle_certificate"] = cert.passed
    else:
        best = min(amb.deltas, key=lambda d: vals.per_delta[d].mean())
        gap = abs(up - float(vals.y_min_gen.mean()))
        bound = amb.shifted_bound(paths.grid, vals.eta)
        pse = paired_se(vals.solutions[best], vals.min_solution, sigma)
        cert_doc = {"regime": "eta-net", "eta": vals.eta, "C_eta": bound, "gap": gap, "se": pse,
                    "pass": gap <= bound + 3 * pse}
        report.checks["eta_net_agreement"] = cert_doc["pass"]
    w.json("certificate.json", cert_doc)
    w.json("game_values.json", vals.as_dict())
    report.summary.update(vals.as_dict())
    return vals


def run_digest(cfg: ScenarioConfig, options: dict) -> str:
    """Config digest combined with the subcommand and its effective options."""
    text = json.dumps({"config": cfg.digest, **options}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _finalize(tmp: Path, final: Path):
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def run_scenario(cfg: ScenarioConfig, subcommand: str, out: os.PathLike, seed: Optional[int] = None,
                 sigma: Optional[float] = None, epsilon: Optional[float] = None, rule: str = "tau_star",
                 deltas=None, family: Optional[str] = None) -> RunReport:
    """Run one subcommand on a validated config and persist the results.

    ``seed``, ``sigma`` (a grid time) and ``epsilon`` override the run
    section.  Solver divergence propagates as an exception and leaves no
    output directory behind.
    """
    if subcommand not in SUBCOMMANDS:
        raise InvalidConfigError(f"unknown subcommand {subcommand!r}")
    if subcommand == "verify":
        return run_verify(out, cfg.run.seed if seed is None else seed, digest=cfg.digest)
    seed = cfg.run.seed if seed is None else int(seed)
    sigma_idx = cfg.grid.index_of(cfg.run.sigma if sigma is None else float(sigma))
    epsilon = cfg.run.epsilon if epsilon is None else float(epsilon)
    if not epsilon > 0:
        raise InvalidConfigError("epsilon must be positive")
    if family is not None and family not in ("zero", "linear-in-y", "lagged-z-constant", "scaled-abs-z"):
        raise InvalidConfigError(f"unknown generator family {family!r}")

    options = {"subcommand": subcommand, "sigma_index": sigma_idx, "epsilon": epsilon}
    if subcommand == "stop":
        options["rule"] = rule
    if subcommand == "robust":
        options["deltas"] = None if deltas is None else [float(d) for d in deltas]
        options["family"] = family
    report = RunReport(subcommand, run_digest(cfg, options), seed)
    report.summary["config_digest"] = cfg.digest
    report.summary["options"] = options
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        w = _Writer(tmp, report)
        t0 = time.perf_counter()
        paths = simulate_paths(cfg.model, cfg.grid, cfg.jump_measure, cfg.run.n_paths, seed, cfg.run.workers)
        report.timing["simulate"] = time.perf_counter() - t0
        t1 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonContractionWarning)
            if subcommand == "solve":
                _solve(cfg, paths, w, report)
            elif subcommand == "reflect":
                _reflect(cfg, paths, w, report)
            elif subcommand == "stop":
                _stop(cfg, paths, w, report, rule, sigma_idx, epsilon)
            else:
                _robust(cfg, paths, w, report, sigma_idx, epsilon, deltas, family)
        report.nonconverged = sum(issubclass(c.category, NonContractionWarning) for c in caught)
        report.timing[subcommand] = time.perf_counter() - t1
        w.json("config.json", cfg.normalized)
        _json(tmp / "report.json", report.as_dict())
        _json(tmp / "timing.json", report.timing)
        final = out / f"{report.digest}-seed{seed}"
        _finalize(tmp, final)
        report.out_dir = final
        return report
    finally:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)


def run_verify(out: os.PathLike, seed: int = 0, digest: str = "oracle-suite",
               negative_control: bool = True) -> RunReport:
    """Run the oracle suite and write ``oracle_table.csv`` and ``.json``.

    The suite passes when every row matches its expectation; the built-in
    negative control row is expected to fail.
    """
    report = RunReport("verify", digest, int(seed))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        timings = {}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonContractionWarning)
            rows = oracle_suite(int(seed), negative_control=negative_control, timings=timings)
        report.nonconverged = sum(issubclass(c.category, NonContractionWarning) for c in caught)
        report.timing = {f"criterion_{k}": v for k, v in timings.items()}
        for r in rows:
            report.checks[f"{r.criterion}: {r.name}"] = r.ok
        write_csv(tmp / "oracle_table.csv", {
            "criterion": [r.criterion for r in rows], "name": [r.name.replace(",", ";") for r in rows],
            "estimate": [r.estimate for r in rows], "target": [r.target for r in rows],
            "tolerance": [r.tolerance for r in rows], "pass": [r.passed for r in rows],
            "expected": [r.expected for r in rows]})
        _json(tmp / "oracle_table.json", [r.as_dict() for r in rows])
        report.outputs += ["oracle_table.csv", "oracle_table.json"]
        report.summary["rows"] = [r.line() for r in rows]
        _json(tmp / "report.json", report.as_dict())
        _json(tmp / "timing.json", report.timing)
        final = out / f"{digest}-seed{seed}"
        _finalize(tmp, final)
        report.out_dir = final
        return report
    finally:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)
