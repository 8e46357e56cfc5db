import numpy as np
import pytest

from heavytail_ccp.distributions import BetaPrime, SqrtBetaPrime, StudentT


def fd(f, x, h):
    """Five-point central difference of a scalar function."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


# laws the shipped scenarios and tests exercise
LAWS = [
    StudentT(1.0), StudentT(2.0), StudentT(4.0), StudentT(20.0),
    BetaPrime(1.0, 2.0), BetaPrime(1.5, 10.0), BetaPrime(3.0, 3.0), BetaPrime(3.380952380952381, 11.142857142857142),
    SqrtBetaPrime(BetaPrime(1.0, 2.0)), SqrtBetaPrime(BetaPrime(1.5, 10.0)),
    SqrtBetaPrime(BetaPrime(3.0, 2.0)), SqrtBetaPrime(BetaPrime(3.380952380952381, 11.142857142857142)),
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def shipped(name):
    from heavytail_ccp.cli import resolve_scenario
    return resolve_scenario(name)


_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one acceptance line: ``verdict(number, ok, detail)``."""
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(line)
