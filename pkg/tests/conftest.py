import pytest

from vnfsim.config import load_preset
from vnfsim.model import Scenario

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Log an acceptance criterion outcome; printed in the terminal summary."""

    def _record(name, ok, detail=""):
        _ACCEPTANCE.append((name, bool(ok), detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture(scope="session")
def table1_cfg():
    return load_preset("table1")


@pytest.fixture(scope="session")
def table1(table1_cfg):
    return table1_cfg.scenario


@pytest.fixture
def fig2():
    """Two ECs with the rates used to illustrate the transition construction."""
    return Scenario.from_lists([(4, 1000), (12, 400)], [(1, 300, 2, 0.25), (3, 50, 4, 1)])


@pytest.fixture
def tiny():
    """K=1, I=1, room for two requests."""
    return Scenario.from_lists([(2, 100)], [(1, 10, 1.0, 0.5)])
