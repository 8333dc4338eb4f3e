import numpy as np
import pytest

from noisygrf.models import IsingModel
from noisygrf.oracle import exact_posterior_grid
from noisygrf.studies import simulate_ising


@pytest.fixture(scope="session")
def ising44_data():
    """4x4 lattice simulated at theta = 0.3 with its exact grid posterior on a wide grid."""
    model = IsingModel(4, 4)
    y = simulate_ising(model, 0.3, 1000, np.random.default_rng(5))
    grid = exact_posterior_grid(model, y, np.linspace(-1.5, 2.5, 801))
    return model, y, grid


def pytest_configure(config):
    config._criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    table = item.config._criteria
    if call.when == "setup" and call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception):
        table[n] = (title, "SKIP", str(call.excinfo.value))
    elif call.when == "call":
        detail = dict(item.user_properties).get("detail", "")
        table[n] = (title, "FAIL" if call.excinfo is not None else "PASS", detail)


def pytest_terminal_summary(terminalreporter, config):
    table = getattr(config, "_criteria", {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(table):
        title, status, detail = table[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title}" + (f" [{detail}]" if detail else ""))
