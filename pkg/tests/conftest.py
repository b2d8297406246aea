import numpy as np
import pytest
from hypothesis import settings

from rcinterp.engine import EngineConfig
from rcinterp.problems import stadium
from rcinterp.star_body import Ball, Polydisk, RadialProfile, hull_body, product_body

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def square_hull(eps=0.25):
    return hull_body(np.array([1, 1j, -1, -1j]), eps)


def all_bodies():
    """One body per kind, keyed by kind name."""
    ang = np.linspace(0, 2 * np.pi, 48, endpoint=False)
    return {
        "ball": Ball(1.5, 2),
        "polydisk": Polydisk([1.0, 0.5]),
        "radial_profile": RadialProfile(np.column_stack([ang, 1 + 0.5 * np.cos(ang) ** 2])),
        "hull_eps": square_hull(),
        "product": product_body(Ball(1.0, 1), stadium()),
    }


@pytest.fixture(scope="session")
def bodies():
    return all_bodies()


@pytest.fixture(scope="session")
def small_config():
    """Coarse audit grid and conformal resolution for quick engine tests."""
    return EngineConfig(grid_radial=48, grid_angular=96, conformal_N=256, modulus_samples=2000)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
