import numpy as np
import pytest

from fermires.geometry import make_patch, solve_graph
from fermires.torus import EnergyLevel, TorusPoint


def random_surface_point(lam, rng, axis=2):
    """Uniform free coordinates, rejected until the level equation solves."""
    E = EnergyLevel(lam)
    while True:
        free = rng.random(2)
        a_s = E.E - np.cos(2 * np.pi * free).sum()
        if abs(a_s) < 0.95:
            xs = solve_graph(free, E, axis, 1 if rng.random() < 0.5 else -1)
            xi = list(free)
            xi.insert(axis, xs)
            return TorusPoint.at(xi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def umbilic_patch():
    return make_patch(TorusPoint.at((0.25, 0.25, 0.25)), EnergyLevel(6.0))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
