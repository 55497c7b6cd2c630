import numpy as np
import pytest

from quasisteady.builtin import builtin_spec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def laplace():
    return builtin_spec("1")


@pytest.fixture(scope="session")
def laplace_diffusive():
    return builtin_spec("2")


@pytest.fixture(scope="session")
def bilaplace():
    return builtin_spec("3")


@pytest.fixture(scope="session")
def broken():
    return builtin_spec("1-broken")


_ACCEPTANCE = []


@pytest.fixture
def record():
    """Record ``(criterion, passed, detail)`` for the acceptance summary."""

    def _record(criterion: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((criterion, bool(passed), detail))
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion:<4} {detail}")
