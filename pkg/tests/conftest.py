"""Shared test plumbing: records acceptance-criterion outcomes so the run
prints one PASS/FAIL line per criterion in the terminal summary."""

import pytest

_CRITERIA: dict[int, tuple[str, bool]] = {}


def record_criterion(number: int, description: str, passed: bool) -> None:
    _CRITERIA[number] = (description, passed)


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_CRITERIA):
        description, passed = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} - {description}")
