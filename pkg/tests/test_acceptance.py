"""The fourteen acceptance criteria, one test each, with a one-line verdict per criterion."""

import pytest

from artifact import checks


@pytest.mark.parametrize("cid", sorted(checks.CHECKS))
def test_criterion(cid, capsys):
    result = checks.run_checks([cid])[0]
    with capsys.disabled():
        print(f"\n{result.line()} {result.detail}")
    assert result.passed, result.detail
