"""Shared pytest configuration.

The acceptance tests register one human-readable PASS/FAIL line per
criterion; the terminal-summary hook prints them even when pytest captures
stdout, so the acceptance verdicts always appear in the run log.
"""

ACCEPTANCE_LINES = []


def record_criterion(number: int, ok: bool, message: str) -> None:
    ACCEPTANCE_LINES.append(
        f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {message}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
