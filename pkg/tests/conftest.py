import pytest

from hoci import StandardizedCumulants, exp_lehmann_model, power_lehmann_model

_ACCEPTANCE_LINES = []


@pytest.fixture
def exp_model():
    return exp_lehmann_model()


@pytest.fixture
def power_model():
    return power_lehmann_model(2.0)


@pytest.fixture
def exp_ell():
    # ell_r = (-1)^r (r-1)! for the exponential Lehmann model
    return StandardizedCumulants.from_higher(-2, 6, -24, 120)


@pytest.fixture
def acceptance_line():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(tag, ok, detail):
        _ACCEPTANCE_LINES.append(f"{tag:<6} {'PASS' if ok else 'FAIL'}  {detail}")
        print(_ACCEPTANCE_LINES[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
