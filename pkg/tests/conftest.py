"""Shared pytest wiring: acceptance-line reporting."""

_criterion_lines: dict[int, str] = {}


def record_criterion(number: int, passed: bool) -> None:
    verdict = "PASS" if passed else "FAIL"
    _criterion_lines[number] = f"[acceptance] criterion {number}: {verdict}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for number in sorted(_criterion_lines):
            terminalreporter.write_line(_criterion_lines[number])
