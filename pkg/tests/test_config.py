import pytest
import yaml

from bsdelab import InvalidConfigError, load_config
from bsdelab.config import DEFAULTS, parse_config

MINIMAL = {"schema_version": 1, "grid": {"horizon": 1.0, "steps": 50}, "model": {"initial": 100.0},
           "terminal": {"payoff": {"kind": "state"}}}


def _with(**sections):
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in MINIMAL.items()}
    data.update(sections)
    return data


def test_minimal_file_gets_defaults(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text(yaml.safe_dump(MINIMAL))
    cfg = load_config(path)
    assert cfg.regression.basis_degree == 3 and cfg.regression.ridge == 1e-8
    assert cfg.picard.max_iters == 20 and cfg.picard.tol == 1e-8
    assert cfg.run.n_paths == DEFAULTS["run"]["n_paths"] and cfg.run.seed == 0
    assert cfg.delay.offsets == (0,) and cfg.obstacle is None and cfg.ambiguity is None
    assert cfg.generator.kind == "zero"


def test_delay_weights_error_names_delay_measure():
    with pytest.raises(InvalidConfigError, match=r"\[delay\] DelayMeasure: weights sum"):
        parse_config(_with(delay={"lags": [0.2, 0.4], "weights": [0.5, 0.6]}))


def test_off_grid_lag():
    with pytest.raises(InvalidConfigError, match="not a multiple of dt"):
        parse_config(_with(delay={"lags": [0.21], "weights": [1.0]}))


def test_parse_error_has_position(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("schema_version: 1\ngrid: {horizon: 1.0, steps: 50\nmodel: x\n")
    with pytest.raises(InvalidConfigError, match="line 3, column"):
        load_config(path)


@pytest.mark.parametrize("data,pattern", [
    ({**MINIMAL, "schema_version": 2}, "schema_version"),
    ({k: v for k, v in MINIMAL.items() if k != "model"}, "missing required section 'model'"),
    (_with(extra=1), "unknown top-level"),
    (_with(regression={"degree": 3, "bogus": 1}), r"\[regression\].*unknown key"),
    (_with(regression={"ridge": -1}), r"\[regression\] RegressionConfig"),
    (_with(picard={"max_iters": 0}), r"\[picard\] PicardConfig"),
    (_with(model={"initial": -1.0}), r"\[model\] ForwardModelSpec"),
    (_with(jump_measure={"marks": [1.0], "intensities": [-1.0]}), r"\[jump_measure\]"),
    (_with(generator={"kind": "unknown"}), r"\[generator\]"),
    (_with(generator={"kind": "scaled-abs-z", "deltas": [0.1, 0.1]}), "distinct"),
    (_with(obstacle={"kind": "digital"}), r"\[obstacle\]"),
    (_with(run={"sigma": 0.013}), r"\[run\]"),
    (_with(run={"epsilon": 0.0}), r"\[run\] epsilon"),
    (_with(terminal={"stopping": {"kind": "random"}}), r"\[terminal.stopping\]"),
    ([1, 2], "mapping"),
])
def test_validation_errors(data, pattern):
    with pytest.raises(InvalidConfigError, match=pattern):
        parse_config(data)


def test_full_config_round_trip():
    cfg = parse_config(_with(
        model={"initial": 100.0, "volatility": 0.2, "jump_loading": [0.1]},
        jump_measure={"marks": [1.0], "intensities": [0.5]},
        generator={"kind": "scaled-abs-z", "coef": 0.05, "deltas": [0.05, 0.15]},
        delay={"lags": [0.0, 0.2], "weights": [0.5, 0.5]},
        obstacle={"kind": "put", "strike": 100.0},
        terminal={"payoff": {"kind": "put", "strike": 100.0},
                  "stopping": {"kind": "first_hit", "level": 80.0}},
        run={"sigma": 0.2, "n_paths": 500}))
    assert cfg.ambiguity.deltas == (0.05, 0.15)
    assert cfg.sigma_index == 10
    assert cfg.delay.offsets == (0, 10)
    assert cfg.terminal.stopping.level == 80.0


def test_digest_ignores_seed_only():
    a = parse_config(_with(run={"seed": 1}))
    b = parse_config(_with(run={"seed": 2}))
    c = parse_config(_with(run={"seed": 1, "n_paths": 20}))
    assert a.digest == b.digest != c.digest
