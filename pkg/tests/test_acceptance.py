"""The thirteen acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run directly (``python3 tests/test_acceptance.py``) or through pytest.
"""

import json

import pytest

from sepshift.suite import CHECKS, RunConfig, run_check

CFG = RunConfig(seed=0)
LINES = []  # printed in the terminal summary by conftest


def _line(result):
    status = "PASS" if result["status"] == "pass" else "FAIL"
    return f"{status} {result['check']}"


@pytest.mark.parametrize("name,fn", CHECKS, ids=[n for n, _ in CHECKS])
def test_criterion(name, fn):
    result = run_check(name, fn, CFG)
    LINES.append(_line(result))
    assert result["status"] == "pass", json.dumps(result["witness"], indent=1, default=str)


def test_all_thirteen_criteria_are_listed():
    assert len(CHECKS) == 13
    assert len({n for n, _ in CHECKS}) == 13


if __name__ == "__main__":
    failed = 0
    for name, fn in CHECKS:
        r = run_check(name, fn, CFG)
        print(_line(r), flush=True)
        failed += r["status"] != "pass"
    raise SystemExit(1 if failed else 0)
