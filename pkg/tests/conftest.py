import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    rows = getattr(mod, "ROWS", None)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(rows):
        terminalreporter.write_line(rows[cid].line())
    passed = sum(r.passed for r in rows.values())
    terminalreporter.write_line(f"{passed}/{len(rows)} criteria pass")
