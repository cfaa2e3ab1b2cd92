"""Acceptance criteria A1-A11, each run at its stated tolerance.

One PASS/FAIL line per criterion is printed in the pytest terminal summary
(see conftest.py).  Run this file directly for the lines alone:

    python3 tests/test_acceptance.py
"""

import pytest

from cospectral.battery import CHECKS, run_check

RESULTS = {}


@pytest.mark.parametrize("name", list(CHECKS))
def test_criterion(name):
    result = run_check(name)
    RESULTS[name] = result
    print(result.line())
    assert result.passed, result.line()


if __name__ == "__main__":
    import sys

    failed = 0
    for name in CHECKS:
        r = run_check(name)
        print(r.line(), flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
