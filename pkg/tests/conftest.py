from importlib import resources

import numpy as np
import pytest

from pinvcurve.curve_solver import solve
from pinvcurve.instruments import assemble, read_quotes

DATA = resources.files("pinvcurve") / "data"


def data_path(name):
    return str(DATA / name)


def load_system(name):
    qf = read_quotes(data_path(name))
    return qf, assemble(qf.instruments, qf.valuation_date, qf.conventions())


@pytest.fixture(scope="session")
def gilts():
    return load_system("uk_gilts_1996.csv")


@pytest.fixture(scope="session")
def usd():
    return load_system("usd_2012.csv")


@pytest.fixture(scope="session")
def eonia():
    return load_system("eur_2013_eonia.csv")


@pytest.fixture(scope="session")
def gilt_curve(gilts):
    return solve(gilts[1])


@pytest.fixture(scope="session")
def usd_curve(usd):
    return solve(usd[1])


@pytest.fixture
def rng():
    return np.random.default_rng(20121001)


def hilbert_norm_squared(g, dg, d2g, horizon, step=1.0 / 365.0):
    """``g(0)^2 + g'(0)^2 + integral_0^horizon g''^2`` by composite Simpson.

    The grid has an even number of cells of width close to ``step`` and ends
    exactly at ``horizon``.
    """
    from scipy.integrate import simpson

    count = int(np.ceil(horizon / step))
    if count % 2:
        count += 1
    x = np.linspace(0.0, horizon, count + 1)
    return float(g(0.0) ** 2 + dg(0.0) ** 2 + simpson(np.asarray(d2g(x)) ** 2, x=x))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
