"""Regression problems used by tests, scripts and the CLI ``--problem`` presets."""
from __future__ import annotations

import numpy as np

from .disk_algebra import node_set
from .engine import EngineConfig, InterpolationProblem
from .star_body import Ball, Polydisk, StarBody, hull_body, product_body

NODE_ANGLES = {
    1: [0.0],
    2: [0.0, np.pi],
    4: [0.3, 1.9, 3.5, 5.0],
}


def stadium() -> StarBody:
    """0.5-neighbourhood of the segment [-1, 1]."""
    return hull_body(np.array([-1.0, 1.0]), 0.5)


def regression_body(name: str) -> StarBody:
    if name == "disk":
        return Ball(1.0, 1)
    if name == "stadium":
        return stadium()
    if name == "polydisk":
        return Polydisk([1.0, 0.5])
    if name == "product":
        return product_body(Ball(1.0, 1), stadium())
    raise KeyError(name)


BODIES = ("disk", "stadium", "polydisk", "product")


def boundary_data(body: StarBody, count: int, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    """``count`` values with gauges in [0.5, 1]; the first one lies on the boundary."""
    rng = np.random.default_rng(seed)
    d = body.dim
    u = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    level = rng.uniform(0.5, 1.0, count)
    level[0] = 1.0
    p = np.atleast_1d(body.gauge(body.center + u))
    return body.center + scale * u * (level / p)[:, None]


def regression_problem(body_name: str, size: int, config: EngineConfig = EngineConfig(),
                       seed: int = 0, scale: float = 1.0) -> InterpolationProblem:
    body = regression_body(body_name)
    S = node_set(NODE_ANGLES[size])
    f = boundary_data(body, size, seed, scale)
    return InterpolationProblem(S, f, body, config, name=f"{body_name}-{size}")


def regression_suite(config: EngineConfig = EngineConfig(), seed: int = 0):
    return [regression_problem(b, s, config, seed) for b in BODIES for s in (1, 2, 4)]
