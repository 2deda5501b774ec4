"""Acceptance criteria, one test per criterion at its stated tolerance.

Each criterion's checks live in ultrascale.suite (shared with the
`ultrascale suite` command). Every row is printed as a pass/fail line in the
terminal summary.
"""
import pytest

from ultrascale import suite

ROWS: dict = {}


@pytest.mark.parametrize("cid", sorted(suite.BY_ID),
                         ids=[f"{c[0]:02d}-{c[1]}" for c in suite.CRITERIA])
def test_criterion(cid):
    row = suite.run_criterion(cid)
    ROWS[cid] = row
    bad = {k: row.detail.get(k) for k, v in row.checks.items() if not v}
    assert row.checks, "criterion ran no checks"
    assert row.status == suite.PASS, f"{row.line()}\n{bad}\n{row.detail.get('error', '')}"


def test_experiment_matrix_complete():
    """Every experiment is covered by a criterion and passes."""
    missing = [i for i in suite.BY_ID if i not in ROWS]
    rows = list(ROWS.values()) + [suite.run_criterion(i) for i in missing]
    matrix = suite.experiment_matrix(rows)
    assert set(matrix) == set(suite.EXPERIMENT_ROWS)
    assert all(v == suite.PASS for v in matrix.values()), matrix
