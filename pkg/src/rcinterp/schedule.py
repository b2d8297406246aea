"""Tolerance schedule: modulus omega, the psi recursion, angle profiles and epsilons.

All tables are piecewise linear on fixed grids so that a schedule is a
plain value that can be dumped, reloaded and re-audited.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conformal import THETA_CAP, CuspProfile

DEPTH_CAP = 8
DEFLATION = 0.9
THETA_FLOOR = 1e-4
INVERSE_STEPS = 64


class ScheduleError(ValueError):
    pass


# --- omega -------------------------------------------------------------------

@dataclass(frozen=True)
class Omega:
    """``omega(t) = t + modulus(t)``; the modulus is extended past ``diam`` by itself."""

    modulus: Callable = field(repr=False)
    diam: float

    def __call__(self, t):
        t = np.asarray(t, float)
        return t + np.asarray(self.modulus(t), float)

    @property
    def top(self) -> float:
        return float(self(self.diam))


@dataclass(frozen=True)
class OmegaInverse:
    """Bisection inverse of ``Omega``; returns the lower bracket so ``omega(inv(s)) <= s``."""

    omega: Omega = field(repr=False)

    def __call__(self, s):
        s = np.asarray(s, float)
        if np.any(s < 0):
            raise ScheduleError("omega inverse argument out of domain")
        lo = np.zeros_like(s)
        # omega(t) >= t, so t = s is a valid upper bracket and precision stays relative
        hi = s.copy()
        for _ in range(INVERSE_STEPS):
            mid = 0.5 * (lo + hi)
            below = self.omega(mid) <= s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return lo


def build_omega(modulus: Callable, diam: float, boundary_contact: bool = False):
    """(omega, omega_inv) for a nondecreasing modulus vanishing at 0."""
    if not diam > 0:
        raise ScheduleError("diam must be positive")
    if abs(float(np.asarray(modulus(np.array([0.0])))[0])) > 1e-12:
        raise ScheduleError("modulus must vanish at 0")
    om = Omega(modulus, float(diam))
    if boundary_contact and om.top < 1:
        raise ScheduleError("data does not reach the boundary scale")
    return om, OmegaInverse(om)


# --- psi recursion -----------------------------------------------------------

@dataclass(frozen=True)
class Table:
    """Piecewise-linear function on a sorted grid, constant outside."""

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    def __call__(self, t):
        return np.interp(np.asarray(t, float), self.x, self.y)

    def to_json(self, stride: int = 1):
        return {"x": self.x[::stride].tolist(), "y": self.y[::stride].tolist()}


def _check_increasing(Psi: Callable) -> None:
    t = np.linspace(0, 1, 257)
    v = np.asarray(Psi(t), float)
    if abs(v[0]) > 1e-14:
        raise ScheduleError("Psi must vanish at 0")
    if np.any(np.diff(v) <= 0):
        bad = int(np.argmax(np.diff(v) <= 0))
        raise ScheduleError(f"Psi is not strictly increasing near t = {t[bad]:.4g}")


def _min_over_r(fn: Callable, y: np.ndarray, grid: int, refine: int = 40) -> np.ndarray:
    """``min_{r in [0,1]} fn(y, r)`` per y: tensor-grid search, then golden refinement."""
    r = np.linspace(0.0, 1.0, grid)
    vals = fn(y[:, None], r[None, :])
    best = np.argmin(vals, axis=1)
    out = vals[np.arange(len(y)), best]
    h = 1.0 / (grid - 1)
    a = np.clip(r[best] - h, 0, 1)
    b = np.clip(r[best] + h, 0, 1)
    g = (np.sqrt(5) - 1) / 2
    for _ in range(refine):
        c = b - g * (b - a)
        d = a + g * (b - a)
        fc, fd = fn(y, c), fn(y, d)
        out = np.minimum(out, np.minimum(fc, fd))
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    return out


def _refined_grid(top: float, size: int, ratio: float = 2 ** 0.125) -> np.ndarray:
    """Uniform grid on [0, top] plus geometric nodes (constant ``ratio``) toward 0.

    For a convex table (Psi superlinear at 0) the chord over a cell ``[t, q t]``
    overshoots by about ``p (p-1) (q-1)^2 / 8`` relative for ``t^p``, far inside
    the deflation; the last cell ``[0, ~1e-298 top]`` is below any audit.
    """
    start = top / ((size - 1) * (ratio - 1))  # geometric spacing beats uniform below here
    count = int(np.ceil(np.log(start / (top * 1e-298)) / np.log(ratio)))
    geo = start * ratio ** -np.arange(count)
    return np.union1d(np.linspace(0.0, top, size), geo[geo < top])


def psi_sequence(Psi: Callable, k_max: int, grid: int = 257,
                 table_size: int = 1025) -> list[Table]:
    """Tables of ``psi_1..psi_kmax`` with ``sum psi_i(r_i) <= Psi(sum r_i / 2^i)``.

    The inner minimum over ``r_1..r_{k-1}`` is carried as a value function
    ``W_k(y) = min_r [W_{k-1}(y + r/2^(k-1)) - psi_{k-1}(r)]`` with ``W_1 = Psi``,
    so each stage costs one 1-D minimisation per table node.
    """
    if k_max > DEPTH_CAP:
        raise ScheduleError(f"schedule depth cap: k_max = {k_max} > {DEPTH_CAP}")
    if k_max < 1:
        raise ScheduleError("k_max must be positive")
    _check_increasing(Psi)
    r = _refined_grid(1.0, table_size)
    psis: list[Table] = []
    W: Callable = Psi
    for k in range(1, k_max + 1):
        if k > 1:
            prev_W, prev_psi, step = W, psis[-1], 2.0 ** -(k - 1)
            y = _refined_grid(2.0 ** -(k - 1), 2 * table_size - 1)
            w = _min_over_r(lambda yy, rr: prev_W(yy + rr * step) - prev_psi(rr), y, grid)
            W = Table(y, w)
        vals = DEFLATION * (1 - r) * np.asarray(W(r / 2.0 ** k), float)
        vals[0] = vals[-1] = 0.0
        psis.append(Table(r, np.maximum(vals, 0.0)))
    return psis


# --- angle profiles and epsilons ---------------------------------------------

def theta_table(psi: Table, k: int, m_norm: float) -> tuple[np.ndarray, np.ndarray]:
    """``theta_k = min(2^k / m * psi_k(1 - r), pi/4)`` on the mirrored psi grid."""
    r = 1.0 - psi.x[::-1]
    y = psi.y[::-1]
    # nodes that collide after rounding keep the one with the smallest x (last in a run)
    keep = np.append(r[1:] != r[:-1], True)
    return r[keep], np.minimum((2.0 ** k / m_norm) * y[keep], THETA_CAP)


def epsilon_sequence(omega_inv: Callable, m_norm: float, m_gauge: float, k_max: int) -> np.ndarray:
    """``eps_0 = 1`` and the recursion; entry ``n`` is ``eps_n`` for ``n = 0..k_max``."""
    if not m_norm > 0:
        raise ScheduleError("m_norm must be positive")
    scale = max(m_gauge / m_norm, 1.0)
    eps = [1.0]
    for n in range(k_max):
        cand = (2.0 ** n / m_norm) * float(omega_inv(np.array([eps[n] / scale]))[0])
        eps.append(min(eps[n], cand, 2.0 ** -(n + 2)))
    eps = np.array(eps)
    if np.any(eps <= 0):
        raise ScheduleError("epsilon sequence underflowed to zero")
    return eps


def stage_weights(k_max: int) -> np.ndarray:
    """``2^-k`` for ``k < k_max`` and ``2^(1-k_max)`` for the last stage; sums to 1 exactly."""
    w = 2.0 ** -np.arange(1, k_max + 1, dtype=float)
    w[-1] *= 2
    return w


@dataclass(frozen=True)
class Schedule:
    omega: Omega = field(repr=False)
    omega_inv: OmegaInverse = field(repr=False)
    m_norm: float
    m_gauge: float
    k_max: int
    psi: list = field(repr=False)
    theta: list = field(repr=False)
    eps: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    requested_k_max: int = 0
    unrealizable: tuple = ()
    psi_factor: float = 0.5

    @property
    def Psi(self) -> Callable:
        return lambda t: self.psi_factor * self.omega_inv(t)

    @property
    def theta_tilde(self) -> list:
        return self.psi

    def to_json(self, stride: int = 16) -> dict:
        t = np.linspace(0, self.omega.diam, 65)
        return {
            "k_max": self.k_max,
            "requested_k_max": self.requested_k_max,
            "unrealizable": list(self.unrealizable),
            "m_norm": self.m_norm,
            "m_gauge": self.m_gauge,
            "eps": self.eps.tolist(),
            "weights": self.weights.tolist(),
            "omega": {"t": t.tolist(), "omega": self.omega(t).tolist()},
            "theta": [{"k": k + 1, "r": th.r[::stride].tolist(), "theta": th.theta[::stride].tolist()}
                      for k, th in enumerate(self.theta)],
        }


def theta_profiles(sched: Schedule) -> list[CuspProfile]:
    return list(sched.theta)


def build_schedule(modulus: Callable, diam: float, m_norm: float, m_gauge: float,
                   k_max: int = 5, grid: int = 257, boundary_contact: bool = False,
                   psi_factor: float = 0.5) -> Schedule:
    """Full schedule; stages whose angle profile falls under the floor are dropped.

    ``Psi = psi_factor * omega^{-1}``; only the default 1/2 is covered by the audits.
    """
    if k_max > DEPTH_CAP:
        raise ScheduleError(f"schedule depth cap: k_max = {k_max} > {DEPTH_CAP}")
    omega, omega_inv = build_omega(modulus, diam, boundary_contact)
    psis = psi_sequence(lambda t: psi_factor * omega_inv(t), k_max, grid)
    profiles, dropped = [], []
    for k, psi in enumerate(psis, start=1):
        r, th = theta_table(psi, k, m_norm)
        if th.max() < THETA_FLOOR or np.any(th[1:-1] <= 0):
            dropped = list(range(k, k_max + 1))
            break
        profiles.append(CuspProfile(r, th, label=f"theta_{k}"))
    realized = len(profiles)
    if realized == 0:
        raise ScheduleError("no realizable stage: theta_1 below the conformal floor")
    return Schedule(omega, omega_inv, float(m_norm), float(m_gauge), realized,
                    psis[:realized], profiles, epsilon_sequence(omega_inv, m_norm, m_gauge, realized),
                    stage_weights(realized), k_max, tuple(dropped), psi_factor)
