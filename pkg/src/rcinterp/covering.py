"""Interpolation into C \\ {0} by lifting through the covering ``exp``.

For a finite node set every singleton is clopen, so the lift picks one
logarithm branch per node; interpolating the logs and exponentiating gives a
nonvanishing disk-algebra extension.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .disk_algebra import Barycentric, Exp, NodeSet, lagrange_extension, polar_grid


class CoveringError(ValueError):
    pass


@dataclass
class LiftProblem:
    S: NodeSet
    f_values: np.ndarray
    branch_offsets: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.f_values, complex).ravel()
        if f.shape != (len(self.S),):
            raise CoveringError("size mismatch between nodes and values")
        if np.any(f == 0):
            raise CoveringError(f"value {int(np.flatnonzero(f == 0)[0])} not in C\\{{0}}")
        self.f_values = f
        b = np.zeros(len(f), int) if self.branch_offsets is None else np.asarray(self.branch_offsets)
        if b.shape != f.shape or not np.all(b == np.round(b)):
            raise CoveringError("branch_offsets must be one integer per node")
        self.branch_offsets = b.astype(int)


@dataclass
class Lift:
    g_tilde: Barycentric
    g: Exp
    logs: np.ndarray = field(repr=False)


def clopen_partition_lift(p: LiftProblem) -> Lift:
    """``g = exp(g~)`` with ``g~`` the Lagrange extension of the chosen logarithms."""
    f = p.f_values
    logs = np.log(np.abs(f)) + 1j * (np.angle(f) + 2 * np.pi * p.branch_offsets)
    gt = lagrange_extension(p.S, logs)
    return Lift(gt, Exp(gt), logs)


@dataclass(frozen=True)
class RangeBound:
    """Annulus ``{exp(-cR) <= |w| <= exp(cR)}`` containing ``exp(c * D_R)``."""

    R: float
    c: float

    @property
    def inner(self) -> float:
        return float(np.exp(-self.c * self.R))

    @property
    def outer(self) -> float:
        return float(np.exp(self.c * self.R))

    def contains(self, w, rtol: float = 1e-12) -> np.ndarray:
        a = np.abs(np.asarray(w))
        return (a >= self.inner * (1 - rtol)) & (a <= self.outer * (1 + rtol))

    def to_json(self):
        return {"R": self.R, "c": self.c, "inner": self.inner, "outer": self.outer}


def range_bound_L(g_tilde, c: float = 1.0, angular: int = 4096) -> RangeBound:
    """Radius of the smallest disk about 0 holding ``g~`` on the closed disk.

    ``g~`` is a polynomial of degree ``n``, so its modulus peaks on the circle and
    Bernstein's inequality ``max|p'| <= n max|p|`` turns the grid maximum ``M``
    into the bound ``M / (1 - n pi / angular)``.
    """
    if c < 1:
        raise CoveringError("interpolation constant c must be >= 1")
    circle = np.exp(2j * np.pi * np.arange(angular) / angular)
    M = float(np.max(np.abs(g_tilde(circle))))
    n = len(getattr(g_tilde, "nodes", ())) - 1
    if n > 0:
        M /= 1 - n * np.pi / angular
    return RangeBound(M, float(c))


def lift_report(p: LiftProblem, grid: tuple[int, int] = (100, 100), c: float = 1.0) -> dict:
    lift = clopen_partition_lift(p)
    z = polar_grid(*grid)
    gz = lift.g(z)
    gS = lift.g(p.S.points)
    scale = 1 + float(np.max(np.abs(p.f_values)))
    resid = float(np.max(np.abs(gS - p.f_values)))
    L = range_bound_L(lift.g_tilde, c)
    report = {
        "interp_residual": resid,
        "interp_tolerance": 1e-10 * scale,
        "min_abs_g": float(np.min(np.abs(gz))),
        "grid_points": int(z.size),
        "range_bound": L.to_json(),
        "range_contains_grid": bool(np.all(L.contains(gz))),
        "branch_offsets": p.branch_offsets.tolist(),
        "logs": [[float(v.real), float(v.imag)] for v in lift.logs],
    }
    report["checks"] = {
        "interpolation": resid <= report["interp_tolerance"],
        "nonvanishing": report["min_abs_g"] > 0,
        "range": report["range_contains_grid"],
    }
    report["ok"] = all(report["checks"].values())
    return report
