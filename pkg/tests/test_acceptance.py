"""Acceptance criteria 1-10 at their stated scales and tolerances.

The oracle suite runs once through the ``verify`` pipeline; each test then
prints its criterion's rows, one pass/fail line per row.
"""

import json

import pytest

from bsdelab.harness import run_verify
from bsdelab.suite import Row

SEED = 0


@pytest.fixture(scope="module")
def verified(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    report = run_verify(out, seed=SEED)
    rows = [Row(**r) for r in json.loads((report.out_dir / "oracle_table.json").read_text())]
    return report, rows


def _check(verified, criterion, capsys):
    _, rows = verified
    mine = [r for r in rows if r.criterion == criterion]
    assert mine, f"no rows for criterion {criterion}"
    with capsys.disabled():
        print()
        for r in mine:
            print("   ", r.line())
    failed = [r.line() for r in mine if not r.ok]
    assert not failed, "\n".join(failed)


@pytest.mark.parametrize("criterion", list(range(1, 11)))
def test_criterion(verified, criterion, capsys):
    _check(verified, criterion, capsys)


def test_negative_control_row_fails(verified, capsys):
    _, rows = verified
    control = [r for r in rows if not r.expected]
    assert len(control) == 1 and not control[0].passed
    _check(verified, 0, capsys)


def test_verify_exit_code(verified):
    report, rows = verified
    assert all(r.ok for r in rows)
    assert report.exit_code == 0
