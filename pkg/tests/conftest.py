"""Shared test plumbing: the acceptance-criteria scoreboard.

test_acceptance.py records one verdict per criterion here; the summary hook
prints them after the run so `pytest -v` always shows the scoreboard, capture
or not.
"""

acceptance_lines = []


def record_criterion(name: str, ok: bool, detail: str):
    verdict = "PASS" if ok else "FAIL"
    acceptance_lines.append(f"[{verdict}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_lines:
        terminalreporter.line(line)
