import warnings

import pytest

from evolvefem.timestepper import StabilityWarning


@pytest.fixture(autouse=True)
def _quiet_stability_warnings():
    # coarse test steps routinely trip the geometric margin monitor
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        yield


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; echoed in the terminal summary."""

    def report(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        print(line)
        request.config._acceptance_lines.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
