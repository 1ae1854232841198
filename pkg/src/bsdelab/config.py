"""Scenario files: YAML in, validated module objects out.

A scenario file is a mapping with ``schema_version: 1`` and the sections
below.  Only ``grid``, ``model`` and ``terminal`` are required::

    schema_version: 1
    grid:         {horizon: 1.0, steps: 50}
    model:        {initial: 100, drift: 0, volatility: 0.2, jump_loading: [], dynamics: geometric}
    jump_measure: {marks: [], intensities: []}
    generator:    {kind: zero, coef: 0, offset: 0, lipschitz_K: null,
                   deltas: null, delta_param: coef, contains_min: true, infimum: null}
    delay:        {lags: [0.0], weights: [1.0]}
    obstacle:     {kind: put, strike: 100, terminal_link: true}
    terminal:     {payoff: {kind: state}, stopping: {kind: horizon}}
    regression:   {degree: 3, ridge: 1.0e-8, min_paths_per_fit: 100, bins: 8}
    picard:       {max_iters: 20, tol: 1.0e-8}
    run:          {n_paths: 10000, seed: 0, sigma: 0.0, epsilon: 0.01, workers: 1}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from .engine import ForwardModelSpec, JumpMeasure, TimeGrid, build_time_grid
from .errors import InvalidConfigError
from .generators import DelayMeasure, GeneratorSpec
from .reflected import ObstacleSpec
from .regression import RegressionConfig
from .bsde import PicardConfig
from .robust import AmbiguitySet
from .terminal import FirstHit, Payoff, TerminalSpec

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "RunSettings", "ScenarioConfig", "load_config", "parse_config", "DEFAULTS"]

DEFAULTS = {
    "model": {"drift": 0.0, "volatility": 0.0, "jump_loading": [], "dynamics": "geometric"},
    "jump_measure": {"marks": [], "intensities": []},
    "generator": {"kind": "zero", "coef": 0.0, "offset": 0.0, "lipschitz_K": None, "table": [],
                  "coef_y": 0.0, "coef_z": 0.0, "coef_u": 0.0, "delta_param": "coef", "deltas": None,
                  "contains_min": True, "infimum": None},
    "delay": {"lags": [0.0], "weights": [1.0]},
    "terminal": {"payoff": {"kind": "state"}, "stopping": {"kind": "horizon"}},
    "regression": {"degree": 3, "ridge": 1e-8, "min_paths_per_fit": 100, "bins": 8},
    "picard": {"max_iters": 20, "tol": 1e-8},
    "run": {"n_paths": 10_000, "seed": 0, "sigma": 0.0, "epsilon": 0.01, "workers": 1},
}
PAYOFF_KEYS = {"kind", "strike", "value", "coefs"}
SECTIONS = {"schema_version", "grid", "model", "jump_measure", "generator", "delay", "obstacle", "terminal",
            "regression", "picard", "run"}
REQUIRED = ("grid", "model", "terminal")


@dataclass(frozen=True)
class RunSettings:
    n_paths: int
    seed: int
    sigma: float
    epsilon: float
    workers: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    grid: TimeGrid
    model: ForwardModelSpec
    jump_measure: JumpMeasure
    generator: GeneratorSpec
    delay: DelayMeasure
    obstacle: Optional[ObstacleSpec]
    terminal: TerminalSpec
    regression: RegressionConfig
    picard: PicardConfig
    run: RunSettings
    ambiguity: Optional[AmbiguitySet]
    normalized: dict

    @property
    def digest(self) -> str:
        """Short hash of the normalized config, seed excluded."""
        body = {k: v for k, v in self.normalized.items() if k != "run"}
        body["run"] = {k: v for k, v in self.normalized["run"].items() if k != "seed"}
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    @property
    def sigma_index(self) -> int:
        return self.grid.index_of(self.run.sigma)


def _merge(section: str, given, defaults: dict) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise InvalidConfigError(f"{section}: expected a mapping, got {type(given).__name__}")
    unknown = set(given) - set(defaults)
    if unknown:
        raise InvalidConfigError(f"{section}: unknown key(s) {sorted(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


def _payoff(section: str, raw) -> Payoff:
    if not isinstance(raw, dict):
        raise InvalidConfigError(f"{section}: expected a mapping")
    unknown = set(raw) - PAYOFF_KEYS
    if unknown:
        raise InvalidConfigError(f"{section}: unknown key(s) {sorted(unknown)}")
    return Payoff(raw.get("kind", "state"), float(raw.get("strike", 0.0)), float(raw.get("value", 0.0)),
                  tuple(raw.get("coefs", ())))


def _generator(section: str, g: dict) -> GeneratorSpec:
    return GeneratorSpec(kind=g["kind"], coef=float(g["coef"]), offset=float(g["offset"]),
                         lipschitz_K=None if g["lipschitz_K"] is None else float(g["lipschitz_K"]),
                         table=tuple(tuple(r) for r in g["table"]), coef_y=float(g["coef_y"]),
                         coef_z=float(g["coef_z"]), coef_u=float(g["coef_u"]), delta_param=g["delta_param"])


def _section(name: str, fn):
    try:
        return fn()
    except InvalidConfigError as exc:
        raise InvalidConfigError(f"[{name}] {exc}") from None
    except (TypeError, ValueError, KeyError) as exc:
        raise InvalidConfigError(f"[{name}] malformed value: {exc}") from None


def parse_config(data) -> ScenarioConfig:
    """Validate a parsed mapping and build the module objects."""
    if not isinstance(data, dict):
        raise InvalidConfigError("scenario file must hold a mapping at the top level")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InvalidConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    unknown = set(data) - SECTIONS
    if unknown:
        raise InvalidConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    for key in REQUIRED:
        if key not in data:
            raise InvalidConfigError(f"missing required section {key!r}")

    norm = {"schema_version": SCHEMA_VERSION}
    g = _section("grid", lambda: _merge("grid", data["grid"], {"horizon": None, "steps": None}))
    grid = _section("grid", lambda: build_time_grid(float(g["horizon"]), int(g["steps"])))
    norm["grid"] = {"horizon": grid.horizon, "steps": grid.steps}

    m = _section("model", lambda: _merge("model", data["model"], {"initial": None, **DEFAULTS["model"]}))
    model = _section("model", lambda: ForwardModelSpec(float(m["initial"]), float(m["drift"]), float(m["volatility"]),
                                                       tuple(float(x) for x in m["jump_loading"]), m["dynamics"]))
    norm["model"] = m

    j = _section("jump_measure", lambda: _merge("jump_measure", data.get("jump_measure"), DEFAULTS["jump_measure"]))
    jm = _section("jump_measure", lambda: JumpMeasure(tuple(float(x) for x in j["marks"]),
                                                      tuple(float(x) for x in j["intensities"])))
    norm["jump_measure"] = j
    if len(model.jump_loading) not in (0, jm.m):
        raise InvalidConfigError("[model] jump_loading needs one factor per mark of jump_measure")

    gen = _section("generator", lambda: _merge("generator", data.get("generator"), DEFAULTS["generator"]))
    generator = _section("generator", lambda: _generator("generator", gen))
    ambiguity = None
    if gen["deltas"] is not None:
        inf = gen["infimum"]
        inf_spec = None
        if inf is not None:
            inf_raw = _section("generator.infimum", lambda: _merge("generator.infimum", inf, DEFAULTS["generator"]))
            inf_spec = _section("generator.infimum", lambda: _generator("generator.infimum", inf_raw))
        ambiguity = _section("generator", lambda: AmbiguitySet(tuple(gen["deltas"]), generator,
                                                               bool(gen["contains_min"]), inf_spec))
    norm["generator"] = gen

    d = _section("delay", lambda: _merge("delay", data.get("delay"), DEFAULTS["delay"]))
    delay = _section("delay", lambda: DelayMeasure(grid, tuple(d["lags"]), tuple(d["weights"])))
    norm["delay"] = d

    obstacle = None
    if data.get("obstacle") is not None:
        o = _section("obstacle", lambda: _merge("obstacle", data["obstacle"],
                                                {"kind": None, "strike": 0.0, "value": 0.0, "coefs": [],
                                                 "terminal_link": True}))
        if o["kind"] not in ("put", "call", "polynomial", "constant"):
            raise InvalidConfigError("[obstacle] kind must be put, call, polynomial or constant")
        pay = _section("obstacle", lambda: _payoff("obstacle", {k: o[k] for k in PAYOFF_KEYS}))
        obstacle = ObstacleSpec(pay, bool(o["terminal_link"]))
        norm["obstacle"] = o

    t = _section("terminal", lambda: _merge("terminal", data["terminal"], DEFAULTS["terminal"]))
    payoff = _section("terminal.payoff", lambda: _payoff("terminal.payoff", t["payoff"]))
    st = t["stopping"] or {"kind": "horizon"}
    if not isinstance(st, dict) or st.get("kind") not in ("horizon", "first_hit"):
        raise InvalidConfigError("[terminal.stopping] kind must be 'horizon' or 'first_hit'")
    stopping = None
    if st["kind"] == "first_hit":
        st = _section("terminal.stopping", lambda: _merge("terminal.stopping", st,
                                                          {"kind": None, "level": None, "direction": "down"}))
        stopping = _section("terminal.stopping", lambda: FirstHit(float(st["level"]), st["direction"]))
    terminal = TerminalSpec(payoff, stopping)
    norm["terminal"] = {"payoff": dict(t["payoff"]), "stopping": dict(st)}

    r = _section("regression", lambda: _merge("regression", data.get("regression"), DEFAULTS["regression"]))
    rcfg = _section("regression", lambda: RegressionConfig(int(r["degree"]), float(r["ridge"]),
                                                           int(r["min_paths_per_fit"]), int(r["bins"])))
    norm["regression"] = r

    p = _section("picard", lambda: _merge("picard", data.get("picard"), DEFAULTS["picard"]))
    pcfg = _section("picard", lambda: PicardConfig(int(p["max_iters"]), float(p["tol"])))
    norm["picard"] = p

    u = _section("run", lambda: _merge("run", data.get("run"), DEFAULTS["run"]))
    run = RunSettings(int(u["n_paths"]), int(u["seed"]), float(u["sigma"]), float(u["epsilon"]), int(u["workers"]))
    if run.n_paths < 1 or run.workers < 1:
        raise InvalidConfigError("[run] n_paths and workers must be positive")
    if not 0 <= run.seed < 2**64:
        raise InvalidConfigError("[run] seed must be a 64-bit unsigned integer")
    if not run.epsilon > 0:
        raise InvalidConfigError("[run] epsilon must be positive")
    _section("run", lambda: grid.index_of(run.sigma))
    norm["run"] = u

    return ScenarioConfig(grid, model, jm, generator, delay, obstacle, terminal, rcfg, pcfg, run, ambiguity, norm)


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file.

    YAML syntax errors are reported with their line and column.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise InvalidConfigError(f"{path}: parse error{where}: {problem}") from None
    return parse_config(data)
