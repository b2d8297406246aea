"""Conformal maps onto cuspidal horn domains, plus a geodesic zipper.

The horn ``{0 < arg w < theta(|w|)}`` has an exponentially crowded cusp at 0,
so a disk-parametrised boundary fit loses all resolution there. The horn map
is therefore parametrised by the strip ``{0 < Im u < 1}``, with the disk
attached through ``u = log((1+z)/(1-z))/pi + i/2``. For the profile family
``c r (1 - r)`` the map is explicit: with ``w = 1/(1 + e^l)``,

    e^l + l = 1 - c u,

so the image of the strip is ``{0 < Im Psi(w) < c}`` for
``Psi(w) = log(w/(1-w)) - 1/w``. Its upper edge follows
``arg w = c |w| (1 - |w|)`` to first order at both cusps. General profiles use
the largest ``c`` whose curve fits under them, then shrink.

The zipper (``ZipperMap``) implements the geodesic algorithm for Jordan
polygons and serves as the calibration route on non-crowded curves.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, ClassVar, Sequence

import numpy as np

from .disk_algebra import HoloFunction, node_from_json, register

THETA_CAP = np.pi / 4
RADIAL_LIMIT = 1 - 1e-8
NEWTON_STEPS = 100


class ConformalError(ValueError):
    pass


# --- profiles ----------------------------------------------------------------

@dataclass(frozen=True)
class CuspProfile:
    """Angle profile ``theta: [0,1] -> [0, pi/4]`` vanishing exactly at 0 and 1."""

    r: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    label: str = "table"

    def __post_init__(self):
        r = np.asarray(self.r, float)
        th = np.asarray(self.theta, float)
        if r[0] != 0 or r[-1] != 1 or np.any(np.diff(r) <= 0):
            raise ConformalError("profile grid must increase from 0 to 1")
        if th[0] != 0 or th[-1] != 0:
            raise ConformalError("profile must vanish at r = 0 and r = 1")
        if np.any(th < 0) or np.any(th > THETA_CAP + 1e-15):
            raise ConformalError("profile must take values in [0, pi/4]")
        if np.any(th[1:-1] <= 0):
            raise ConformalError("profile must be positive on (0, 1)")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", th)

    def __call__(self, r):
        return np.interp(np.asarray(r, float), self.r, self.theta, left=0.0, right=0.0)

    @classmethod
    def from_callable(cls, fn: Callable, samples: int = 4097, label: str = "callable"):
        r = _cusp_grid(samples)
        th = np.asarray(fn(r), float)
        th[0] = th[-1] = 0.0
        return cls(r, np.minimum(th, THETA_CAP), label)

    def curve(self, r, scale: float = 1.0) -> np.ndarray:
        r = np.asarray(r, float)
        return r * np.exp(1j * scale * self(r))

    def fit_coefficient(self) -> float:
        """Largest ``c`` with ``c r (1-r) <= theta(r)`` on the profile grid and between nodes."""
        rr = np.union1d(self.r, np.linspace(0, 1, 20001))[1:-1]
        return float(np.min(self(rr) / (rr * (1 - rr))))

    def to_json(self):
        return {"label": self.label, "r": self.r.tolist(), "theta": self.theta.tolist()}

    @classmethod
    def from_json(cls, data):
        return cls(np.asarray(data["r"]), np.asarray(data["theta"]), data.get("label", "table"))


def _cusp_grid(samples: int) -> np.ndarray:
    """Grid on [0,1] refined geometrically toward both ends."""
    half = samples // 2
    k = np.linspace(0.0, 1.0, half + 1)
    left = 0.5 * (np.expm1(8 * k) / np.expm1(8))
    r = np.concatenate([left, 1 - left[::-1]])
    return np.unique(np.clip(r, 0, 1))


def parabolic_profile(c: float, samples: int = 4097) -> CuspProfile:
    return CuspProfile.from_callable(lambda r: c * r * (1 - r), samples, label=f"parabolic:{c!r}")


# --- strip coordinates -------------------------------------------------------

def strip_from_disk(z):
    z = np.asarray(z, complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        # both factors lie in the right half-plane on the closed disk, so the logs split
        u = (np.log1p(z) - np.log1p(-z)) / np.pi
    # rounding on the circle can step just outside the closed strip
    return u.real + 1j * np.clip(u.imag + 0.5, 0.0, 1.0)


def strip_from_exponent(P):
    """Strip coordinate of ``exp(-P)``, accurate for tiny ``P``: (1+e^-P)/(1-e^-P) = coth(P/2)."""
    P = np.asarray(P, complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.log(1.0 / np.tanh(P / 2)) / np.pi
    return u.real + 1j * np.clip(u.imag + 0.5, 0.0, 1.0)


def disk_from_strip(u):
    u = np.asarray(u, complex)
    right = u.real > 0
    # evaluate through exp(-pi u) on the right half so nothing overflows
    with np.errstate(over="ignore", invalid="ignore"):
        q = -1j * np.exp(np.pi * np.where(right, 0, u))
        qi = 1j * np.exp(-np.pi * np.where(right, u, 0))
        z = np.where(right, (1 - qi) / (1 + qi), (q - 1) / (q + 1))
    return np.where(np.isposinf(u.real), 1.0 + 0j, z)


def _solve_ell(v: np.ndarray) -> np.ndarray:
    """Principal solution of ``e^l + l = v`` (a Lambert-W in log form)."""
    v = np.asarray(v, complex)
    shape = v.shape
    v = v.ravel()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ell = np.where(v.real > 1, np.log(v), v - np.exp(np.minimum(v.real, 1)) * np.exp(1j * v.imag))
    # per-element freezing keeps each result independent of its neighbours in the batch
    active = np.isfinite(ell)
    for _ in range(NEWTON_STEPS):
        if not active.any():
            break
        e = np.exp(ell[active])
        step = (e + ell[active] - v[active]) / (e + 1)
        ell[active] -= step
        idx = np.flatnonzero(active)
        active[idx[np.abs(step) <= 4e-16 * (1 + np.abs(ell[idx]))]] = False
    return ell.reshape(shape)


@dataclass(frozen=True)
class HornMap:
    """Conformal map of the disk onto ``{0 < Im Psi(w) < slope}`` with ``-1 -> 0`` and ``1 -> 1``.

    ``profile`` is the horn the image is certified against; ``node_images``
    are the prescribed nodes on the shrunk profile curve and ``node_params``
    their strip coordinates.
    """

    slope: float
    profile: CuspProfile | None = None
    shrink: float = 0.0
    node_images: np.ndarray | None = field(default=None, repr=False)
    node_params: np.ndarray | None = field(default=None, repr=False)
    accuracy: float = float("nan")
    kind: ClassVar[str] = "horn"
    z0: ClassVar[complex] = -1.0 + 0j
    z1: ClassVar[complex] = 1.0 + 0j

    @property
    def resolution(self) -> int:
        return 0 if self.node_images is None else len(self.node_images)

    @property
    def preimages(self) -> np.ndarray:
        """Circle angles of the nodes, non-decreasing from -pi (the tip at 0) to pi.

        Deep cusp nodes sit within rounding of -1 on the circle; ``node_params``
        keeps their strictly ordered strip coordinates.
        """
        t = self.node_params
        with np.errstate(over="ignore"):
            half = np.pi - 2 * np.arctan(np.exp(np.pi * t.real))
        return np.where(t.imag > 0.5, half, -half)

    def from_strip(self, u):
        u = np.asarray(u, complex)
        finite = np.isfinite(u)
        with np.errstate(over="ignore", invalid="ignore"):
            ell = _solve_ell(1 - self.slope * np.where(finite, u, 0))
            w = 1.0 / (1.0 + np.exp(ell))
        w = np.where(np.isposinf(u.real), 1.0 + 0j, w)
        return np.where(np.isneginf(u.real), 0j, w)

    def to_strip(self, w):
        """Closed-form inverse; the tips 0 and 1 go to -inf and +inf."""
        w = np.asarray(w, complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (np.log(w / (1 - w)) - 1 / w + 2) / self.slope
        u = np.where(w == 0, -np.inf + 0j, u)
        return np.where(w == 1, np.inf + 0j, u)

    def forward(self, z):
        z = np.asarray(z, complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.from_strip(strip_from_disk(z))
        out = np.where(z == 1, 1.0 + 0j, out)
        return np.where(z == -1, 0j, out)

    def inverse(self, w):
        u = self.to_strip(w)
        with np.errstate(over="ignore", invalid="ignore"):
            z = disk_from_strip(u)
        z = np.where(np.isneginf(u.real), -1.0 + 0j, z)
        return np.where(np.isposinf(u.real), 1.0 + 0j, z)

    def to_json(self):
        return {"kind": self.kind, "slope": self.slope, "shrink": self.shrink,
                "accuracy": self.accuracy,
                "profile": None if self.profile is None else self.profile.to_json()}


def build_cusp_map(profile: CuspProfile, N: int = 1024, shrink: float = 0.2,
                   audit_grid: int = 100) -> HornMap:
    """Horn map for ``(1 - shrink) * theta``, certified to stay inside the closed horn of ``theta``."""
    if N < 64:
        raise ConformalError("N too small for cusp resolution (need N >= 64)")
    if not 0 <= shrink < 1:
        raise ConformalError("shrink must lie in [0, 1)")
    slope = (1 - shrink) * profile.fit_coefficient()
    if not slope > 0:
        raise ConformalError("profile has no positive parabolic minorant")
    # nodes on the shrunk curve: half on [0,1], half on the arc, clustered at the cusps
    radii = _cusp_grid(N // 2 + 1)[1:-1]
    seg = radii.astype(complex)
    arc = profile.curve(radii[::-1], 1 - shrink)
    nodes = np.concatenate([[0j], seg, [1 + 0j], arc])
    base = HornMap(slope)
    params = base.to_strip(nodes)
    # midpoints between consecutive nodes along each edge, measured against the shrunk curve
    t_arc = params[len(seg) + 2:].real
    mids = 0.5 * (t_arc[1:] + t_arc[:-1])
    boundary = base.from_strip(mids + 1j)
    dense_r = np.linspace(0, 1, 200001)
    accuracy = float(np.max(_distance_to_polyline(boundary, profile.curve(dense_r, 1 - shrink))))
    G = HornMap(slope, profile, shrink, nodes, params, accuracy)
    report = verify_containment(G, profile, audit_grid)
    if not report["ok"]:
        raise ConformalError("insufficient shrink or resolution: "
                             f"angle margin {report['min_angle_margin']:.3g}")
    return G


def _distance_to_polyline(points: np.ndarray, curve: np.ndarray) -> np.ndarray:
    """Distance from each point to a polyline whose vertices are dense along arclength."""
    idx = np.searchsorted(np.abs(curve), np.abs(points))
    out = np.empty(len(points))
    for k, (p, i) in enumerate(zip(points, idx)):
        lo, hi = max(i - 3, 0), min(i + 3, len(curve) - 1)
        a, b = curve[lo:hi], curve[lo + 1:hi + 1]
        d = b - a
        t = np.clip(np.real((p - a) * np.conj(d)) / np.maximum(np.abs(d) ** 2, 1e-300), 0, 1)
        out[k] = np.min(np.abs(a + t * d - p))
    return out


def map_eval(G, z):
    """Evaluate a conformal map on the closed disk; boundary points use their continuous extension."""
    z = np.asarray(z, complex)
    if np.any(np.abs(z) > 1 + 1e-12):
        raise ConformalError("outside closed disk")
    if isinstance(G, HornMap):
        return G.forward(z)
    on_circle = np.abs(z) >= 1 - 1e-12
    inner = np.where(on_circle, z * RADIAL_LIMIT, z)
    out = G.forward(inner)
    if np.any(on_circle):
        # Richardson step: f(1) ~ 2 f(1-h) - f(1-2h)
        far = G.forward(z * (1 - 2 * (1 - RADIAL_LIMIT)))
        out = np.where(on_circle, 2 * out - far, out)
    return out


def containment_margins(values: np.ndarray, profile: CuspProfile) -> tuple[np.ndarray, np.ndarray]:
    """(theta(|w|) - arg w, arg w) for values in the closed horn; 0 and 1 are boundary points."""
    values = np.asarray(values, complex)
    mod = np.abs(values)
    ang = np.angle(values)
    tip = (mod == 0) | (values == 1)
    upper = np.where(tip, 0.0, profile(mod) - ang)
    lower = np.where(tip, 0.0, ang)
    return upper, lower


def verify_containment(G, profile: CuspProfile, grid: int = 100) -> dict:
    """Sample ``grid**2`` interior and ``grid`` boundary points; report horn margins.

    Interior points are spread in the strip coordinate so that the cusp
    regions are visited at all depths, plus a uniform polar grid of the disk.
    """
    samples = [_audit_points(G, grid)]
    r = np.linspace(0, 1, grid, endpoint=False)[1:]
    th = 2 * np.pi * np.arange(grid) / grid
    samples.append((r[:, None] * np.exp(1j * th)).ravel())
    samples.append(np.exp(1j * th))
    z = np.concatenate(samples)
    vals = map_eval(G, z)
    upper, lower = containment_margins(vals, profile)
    rel = np.where(profile(np.abs(vals)) > 0, upper / np.maximum(profile(np.abs(vals)), 1e-300), 0.0)
    report = {
        "samples": int(z.size),
        "min_angle_margin": float(np.min(upper)),
        "min_relative_margin": float(np.min(rel)),
        "min_arg": float(np.min(lower)),
        "max_modulus": float(np.max(np.abs(vals))),
    }
    report["ok"] = bool(report["min_angle_margin"] >= -1e-9 and report["min_arg"] >= -1e-9
                        and report["max_modulus"] <= 1 + 1e-12)
    return report


def _audit_points(G, grid: int) -> np.ndarray:
    if not isinstance(G, HornMap):
        return np.zeros(0, complex)
    # strip depth where |w| ~ 1e-3 down to 1 - |w| ~ 1e-12
    t_lo = float(np.real(G.to_strip(np.array([1e-3 + 0j]))[0]))
    t_hi = float(np.real(G.to_strip(np.array([1 - 1e-12 + 0j]))[0]))
    t = np.linspace(t_lo, t_hi, grid)
    y = np.linspace(0, 1, grid)
    u = (t[:, None] + 1j * y[None, :]).ravel()
    return disk_from_strip(u)


# --- geodesic zipper ---------------------------------------------------------

def _signed_sqrt(q, w):
    s = np.sqrt(q)
    return np.where(np.real(w) < 0, -s, s)


class ZipperMap:
    """Geodesic zipper for the Jordan polygon through ``nodes`` (counterclockwise).

    Every stage is an explicit conformal map, so the composite is exactly
    conformal onto the interior of the curve it interpolates. The disk is
    attached so that ``ref`` (an interior point) maps to/from 0.
    """

    kind = "zipper"

    def __init__(self, nodes: Sequence[complex], ref: complex = 0j):
        z = np.asarray(nodes, complex)
        if len(z) < 4:
            raise ConformalError("zipper needs at least 4 nodes")
        self.node_images = z
        self.za, self.zb = z[0], z[1]
        pts = np.concatenate([z[2:], [ref]])
        pts = 1j * np.sqrt((pts - self.zb) / (pts - self.za))
        far = np.inf  # image of z[0]
        params = []
        for k in range(len(z) - 2):
            a = pts[k]
            ib = a.real / abs(a) ** 2
            c = abs(a) ** 2 / a.imag
            params.append((ib, c))
            w = pts / (1 - pts * ib)
            pts = _signed_sqrt(w * w + c * c, w)
            pts[k] = 0.0
            if np.isinf(far):
                if ib != 0:
                    wi = -1 / ib
                    far = float(np.sign(wi) * np.hypot(wi, c))
            else:
                wi = far / (1 - far * ib)
                far = float(np.sign(wi) * np.hypot(wi, c))
        self.params = params
        self.zeta = far
        u = pts[-1] / (1 - pts[-1] / far)
        self.sign = -1.0 if (-(u * u)).imag > 0 else 1.0
        self.a = self.sign * u * u
        self.resolution = len(z)
        # nodes sit on slit edges where the branch is ambiguous; nudge toward ref first
        with np.errstate(divide="ignore", invalid="ignore"):
            pre = self.inverse(z + 1e-12 * (ref - z))
        self.preimages = np.angle(pre)

    def _from_half_plane(self, w):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (w - self.a) / (w - np.conj(self.a))

    def inverse(self, w):
        w = np.asarray(w, complex)
        h = 1j * np.sqrt((w - self.zb) / (w - self.za))
        for ib, c in self.params:
            h = h / (1 - h * ib)
            h = _signed_sqrt(h * h + c * c, h)
        u = h / (1 - h / self.zeta)
        return self._from_half_plane(self.sign * u * u)

    def forward(self, z):
        z = np.asarray(z, complex)
        w = (self.a - np.conj(self.a) * z) / (1 - z)
        u = np.sqrt(self.sign * w)
        u = np.where(u.imag < 0, -u, u)
        w = u / (1 + u / self.zeta)
        for ib, c in reversed(self.params):
            v = _signed_sqrt(w * w - c * c, w)
            w = v / (1 + v * ib)
        m = -w * w
        return (m * self.za - self.zb) / (m - 1)

    def to_json(self):
        return {"kind": self.kind, "nodes": [[float(p.real), float(p.imag)] for p in self.node_images]}


def calibration_map(N: int = 1024, inset: float | None = None) -> ZipperMap:
    """Zipper for a circle of radius ``1 - inset``; the exact answer is a scaled rotation.

    Geodesic arcs bulge past the circle through the nodes by about
    ``0.3 (pi/N)^2``; the default inset ``0.5 (pi/N)^2`` keeps the image in the
    closed unit disk.
    """
    if inset is None:
        inset = 0.5 * (np.pi / N) ** 2
    return ZipperMap((1 - inset) * np.exp(2j * np.pi * np.arange(N) / N))


def calibration_report(N: int = 1024, points: int = 1000, seed: int = 0) -> dict:
    """Fit the calibration map by a rotation ``z -> e^{i alpha} z`` on random interior points."""
    Z = calibration_map(N)
    rng = np.random.default_rng(seed)
    z = np.sqrt(rng.uniform(0, 0.9**2, points)) * np.exp(2j * np.pi * rng.uniform(0, 1, points))
    w = Z.forward(z)
    alpha = float(np.angle(np.sum(w * np.conj(z))))
    err = float(np.max(np.abs(w - np.exp(1j * alpha) * z)))
    ring = np.exp(2j * np.pi * (np.arange(4 * N) + 0.5) / (4 * N))
    return {"N": N, "points": points, "rotation": alpha, "max_rotation_error": err,
            "max_modulus": float(np.max(np.abs(map_eval(Z, ring)))),
            "inverse_roundtrip": float(np.max(np.abs(Z.inverse(w) - z)))}


def boundary_correspondence(G: HornMap) -> list[tuple[float, complex, float]]:
    """(curve parameter t in [0,1], gamma(t), preimage angle) for every node."""
    n = G.resolution
    t = np.arange(n) / n
    return list(zip(t.tolist(), G.node_images.tolist(), G.preimages.tolist()))


# --- DAG node ----------------------------------------------------------------

@register
@dataclass(frozen=True)
class HornStage(HoloFunction):
    """``G o g_a o exp(-P)`` evaluated in strip coordinates.

    ``g_a(z) = (z + a)/(1 + a z)`` fixes -1 and 1 and acts on the strip as the
    translation ``u -> u - depth`` with ``a = -tanh(pi depth / 2)``; the depth is
    stored directly because ``a`` rounds to -1 long before the stage is deep
    enough.
    """

    slope: float
    depth: float
    exponent: HoloFunction
    tag: ClassVar[str] = "horn_stage"

    @property
    def horn(self) -> HornMap:
        return HornMap(self.slope)

    @property
    def mobius_parameter(self) -> float:
        return -float(np.tanh(np.pi * self.depth / 2))

    def __call__(self, z):
        P = self.exponent(z)
        u = strip_from_exponent(P) - self.depth
        out = self.horn.from_strip(u)
        return np.where(P == 0, 1.0 + 0j, out)

    def to_json(self):
        return {"node": self.tag, "slope": self.slope, "depth": self.depth,
                "exponent": self.exponent.to_json()}

    @classmethod
    def from_json(cls, data):
        return cls(float(data["slope"]), float(data["depth"]), node_from_json(data["exponent"]))


@register
@dataclass(frozen=True)
class HornApply(HoloFunction):
    """``G(inner(z))`` for a horn map ``G``; ``inner`` must map into the closed disk."""

    slope: float
    inner: HoloFunction
    tag: ClassVar[str] = "horn_apply"

    def __call__(self, z):
        return HornMap(self.slope).forward(self.inner(z))

    def to_json(self):
        return {"node": self.tag, "slope": self.slope, "inner": self.inner.to_json()}

    @classmethod
    def from_json(cls, data):
        return cls(float(data["slope"]), node_from_json(data["inner"]))
