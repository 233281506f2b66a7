"""Runs every acceptance criterion at its stated tolerance.

Each test prints one PASS/FAIL line; run with ``-s`` to see them inline.
"""

import pytest

from treegibbs import acceptance


@pytest.mark.slow
@pytest.mark.parametrize("check", acceptance.CRITERIA, ids=lambda c: f"criterion_{c.number:02d}")
def test_criterion(check):
    result = check()
    print(result.line())
    assert result.passed, result.line()
