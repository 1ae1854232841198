import numpy as np
import pytest

from bsdelab import (DelayMeasure, GeneratorSpec, InvalidConfigError, ObstacleSpec, Payoff, TerminalSpec,
                     binomial_american, skorohod_residual, solve_bsde, solve_reflected)
from bsdelab.reflected import structural_checks

from conftest import rel


def test_no_obstacle_equals_plain(put_paths, grid50):
    term = TerminalSpec(Payoff("put", 100.0))
    spec = GeneratorSpec("scaled-abs-z", 0.1)
    dm = DelayMeasure(grid50, (0.0, 0.2), (0.5, 0.5))
    plain = solve_bsde(term, put_paths, spec, dm)
    refl = solve_reflected(term, ObstacleSpec(Payoff("none"), terminal_link=False), put_paths, spec, dm)
    assert np.array_equal(plain.Y, refl.Y)
    assert np.array_equal(plain.Z, refl.Z)
    assert np.all(refl.K == 0)


def test_snell_envelope_vs_tree(put_solution):
    tree = binomial_american(100.0, 100.0, 1.0, 0.2, 2000)
    assert rel(put_solution.Y[:, 0].mean(), tree) <= 0.02


def test_structural_invariants(put_solution):
    chk = structural_checks(put_solution)
    assert chk["min_domination_gap"] >= -1e-12
    assert chk["min_K_increment"] >= 0 and chk["max_abs_K0"] == 0.0
    assert chk["skorohod_residual"] <= 1e-12
    rep = skorohod_residual(put_solution)
    assert rep.aggregate <= 1e-12 and not rep.flagged
    assert put_solution.K[:, -1].max() > 0


def test_deep_otm_obstacle_inactive(put_paths, grid50):
    obstacle = ObstacleSpec(Payoff("put", 40.0), terminal_link=False)
    sol = solve_reflected(TerminalSpec(Payoff("state")), obstacle, put_paths, GeneratorSpec(),
                          DelayMeasure.instantaneous(grid50))
    assert np.mean(sol.K[:, -1] == 0) >= 0.99


def test_skorohod_detector():
    class Hand:
        Y = np.array([[2.0, 1.0, 1.0]])
        obstacle_samples = np.array([[1.0, 1.0, 1.0]])
        K = np.array([[0.0, 1.0, 1.0]])
    rep = skorohod_residual(Hand)
    assert rep.aggregate == 1.0 and rep.flagged
    Hand.K = np.zeros((1, 3))
    assert skorohod_residual(Hand).aggregate == 0.0


def test_terminal_below_obstacle_rejected(put_paths, grid50):
    with pytest.raises(InvalidConfigError):
        solve_reflected(TerminalSpec(Payoff("constant", value=0.0)), ObstacleSpec(Payoff("put", 100.0), False),
                        put_paths, GeneratorSpec(), DelayMeasure.instantaneous(grid50))


def test_reflected_with_delay_and_jumps(jump_paths, grid50):
    call = Payoff("call", 100.0)
    sol = solve_reflected(TerminalSpec(call), ObstacleSpec(call), jump_paths, GeneratorSpec("linear-in-y", -0.05),
                          DelayMeasure(grid50, (0.0, 0.1), (0.5, 0.5)))
    chk = structural_checks(sol)
    assert chk["min_domination_gap"] >= -1e-12 and chk["skorohod_residual"] <= 1e-12
    assert sol.report.converged
