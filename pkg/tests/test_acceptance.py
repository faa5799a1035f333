"""The twelve acceptance criteria, each at its stated tolerance and time budget.

Every run prints one [PASS]/[FAIL] line per criterion, both inline and in
the "acceptance criteria" section of the terminal summary.
"""

import pytest

from rhdet.acceptance import CRITERIA, run_criterion

SLOW = {6, 7}


@pytest.mark.parametrize("number", [pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n
                                    for n in sorted(CRITERIA)])
def test_criterion(number, acceptance_lines, capsys):
    res = run_criterion(number)
    acceptance_lines.append(res.line())
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.details
    assert res.within_budget, f"took {res.elapsed:.1f}s against a budget of {res.budget}s"
