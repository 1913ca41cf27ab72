"""Acceptance criteria 1-14, one test each.

Every test prints its one-line verdict (outside pytest's capture, so it
shows up in the log whether the criterion passes or fails) and then asserts
the verdict.
"""

import pytest

from renewtrie.acceptance import CHECKS, run_check


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, capsys):
    result = run_check(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
