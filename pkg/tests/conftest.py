import pytest

from dealbid import Deal, DealState, UniformWinModel

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def desk_win():
    return UniformWinModel(0.0, 0.04, 4)


@pytest.fixture
def fig1():
    """Deal state and win model of the non-concave example objective."""
    deal = Deal(m=25, e=3000, rho=15.0, mu=0.002)
    state = DealState.at(deal, clicks=20, remaining_visits=3000)
    return deal, state, UniformWinModel(0.0, 0.1, 2)
