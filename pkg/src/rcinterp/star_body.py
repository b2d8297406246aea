"""Star-shaped bodies in C^n exposed through their Minkowski gauge.

A body is an open set ``M`` star-shaped about ``center`` with the segment
property: every closed-body point ``v`` has ``[center, v)`` inside ``M``.
All bodies evaluate ``p_M(v - center)`` vectorised over leading axes, with
vectors stored as complex arrays of shape ``(..., n)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

BOUNDARY_BAND = 1e-9
BISECTION_STEPS = 60


class GaugeError(ValueError):
    pass


def as_vectors(v, dim: int) -> np.ndarray:
    """Coerce ``v`` to a complex array with trailing axis ``dim``."""
    arr = np.asarray(v, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != dim:
        raise GaugeError(f"dimension mismatch: expected {dim}, got {arr.shape[-1]}")
    if not np.all(np.isfinite(arr)):
        raise GaugeError("non-finite input vector")
    return arr


def to_real(v: np.ndarray) -> np.ndarray:
    """C^n -> R^2n with coordinates (Re z1, Im z1, Re z2, ...)."""
    out = np.empty(v.shape[:-1] + (2 * v.shape[-1],))
    out[..., 0::2] = v.real
    out[..., 1::2] = v.imag
    return out


def to_complex(x: np.ndarray) -> np.ndarray:
    return x[..., 0::2] + 1j * x[..., 1::2]


@dataclass(eq=False)
class StarBody:
    """Base class; subclasses implement ``_gauge`` on centred coordinates."""

    dim: int
    center: np.ndarray = field(repr=False)
    kernel_inradius: float
    outradius: float
    lipschitz_bound: float
    convex: bool = False
    kind: str = "abstract"

    def gauge(self, v) -> np.ndarray:
        w = as_vectors(v, self.dim) - self.center
        return self._gauge(w)

    def _gauge(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def classify(self, v) -> np.ndarray:
        """'interior' / 'boundary' / 'exterior' with a 1e-9 band around 1."""
        p = np.atleast_1d(self.gauge(v))
        labels = np.full(p.shape, "boundary", dtype=object)
        labels[p < 1 - BOUNDARY_BAND] = "interior"
        labels[p > 1 + BOUNDARY_BAND] = "exterior"
        return labels

    def scaled(self, factor: float) -> "StarBody":
        return ScaledBody(self, float(factor))

    def translated(self, shift) -> "StarBody":
        return TranslatedBody(self, np.asarray(shift, dtype=complex).reshape(self.dim))

    def to_json(self) -> dict:
        raise NotImplementedError(f"{self.kind} bodies are not serialisable")


def gauge_eval(body: StarBody, v) -> np.ndarray:
    return body.gauge(v)


class Ball(StarBody):
    def __init__(self, radius: float = 1.0, dim: int = 1, center=None):
        if radius <= 0:
            raise GaugeError("ball radius must be positive")
        c = np.zeros(dim, complex) if center is None else np.asarray(center, complex)
        super().__init__(dim, c, radius, radius, 1.0 / radius, True, "ball")
        self.radius = float(radius)

    def _gauge(self, w):
        return np.linalg.norm(w, axis=-1) / self.radius

    def to_json(self):
        return {"kind": "ball", "radius": self.radius, "dim": self.dim}


class Polydisk(StarBody):
    def __init__(self, radii: Sequence[float], center=None):
        r = np.asarray(radii, dtype=float)
        if np.any(r <= 0):
            raise GaugeError("polydisk radii must be positive")
        dim = len(r)
        c = np.zeros(dim, complex) if center is None else np.asarray(center, complex)
        super().__init__(dim, c, float(r.min()), float(np.sqrt(np.sum(r**2))),
                         1.0 / float(r.min()), True, "polydisk")
        self.radii = r

    def _gauge(self, w):
        return np.max(np.abs(w) / self.radii, axis=-1)

    def to_json(self):
        return {"kind": "polydisk", "radii": self.radii.tolist()}


class RadialProfile(StarBody):
    """Planar star body ``{r < rho(arg)}`` with piecewise-linear periodic ``rho``."""

    def __init__(self, profile: Sequence[Sequence[float]]):
        prof = np.asarray(profile, dtype=float)
        order = np.argsort(np.mod(prof[:, 0], 2 * np.pi))
        ang = np.mod(prof[order, 0], 2 * np.pi)
        rad = prof[order, 1]
        if np.any(rad <= 0):
            raise GaugeError("profile radii must be positive")
        self._ang = np.concatenate([ang - 2 * np.pi, ang, ang + 2 * np.pi])
        self._rad = np.tile(rad, 3)
        # |grad p| = sqrt(1 + (rho'/rho)^2) / rho, worst at the smaller endpoint
        a2 = np.append(ang, ang[0] + 2 * np.pi)
        r2 = np.append(rad, rad[0])
        slope = np.diff(r2) / np.maximum(np.diff(a2), 1e-300)
        rmin_seg = np.minimum(r2[:-1], r2[1:])
        lip = float(np.max(np.sqrt(1 + (slope / rmin_seg) ** 2) / rmin_seg))
        super().__init__(1, np.zeros(1, complex), float(rad.min()), float(rad.max()),
                         lip, False, "radial_profile")
        self.profile = np.column_stack([ang, rad])

    def radius_at(self, phi):
        return np.interp(np.mod(phi, 2 * np.pi), self._ang, self._rad)

    def _gauge(self, w):
        z = w[..., 0]
        return np.abs(z) / self.radius_at(np.angle(z))

    def to_json(self):
        return {"kind": "radial_profile", "profile": self.profile.tolist()}


class EpsHull(StarBody):
    """Open eps-neighbourhood of the convex hull of ``points``, centred at their centroid.

    The ray exit parameter is computed exactly: the fattened hull is the union
    over affinely independent point subsets of the prisms
    ``{x : proj_aff(x) in face, dist(x, aff) < eps}``.
    """

    def __init__(self, points, eps: float):
        if eps <= 0:
            raise GaugeError("eps must be positive")
        pts = np.asarray(points, dtype=complex)
        if pts.ndim == 1:
            pts = pts[:, None]
        if len(pts) == 0:
            raise GaugeError("hull needs at least one point")
        centroid = pts.mean(axis=0)
        rel = to_real(pts - centroid)
        self.eps = float(eps)
        self.points = pts
        self._faces = self._build_faces(rel)
        hull_in = _hull_inradius(rel)
        rho = self.eps + hull_in
        outr = float(np.max(np.linalg.norm(rel, axis=1))) + self.eps
        super().__init__(pts.shape[1], centroid, rho, outr, 1.0 / rho, True, "hull_eps")

    @staticmethod
    def _build_faces(rel: np.ndarray):
        k, d = rel.shape
        faces = []
        for size in range(1, min(k, d + 1) + 1):
            for idx in itertools.combinations(range(k), size):
                p0 = rel[idx[0]]
                D = rel[list(idx[1:])] - p0
                if size > 1:
                    gram = D @ D.T
                    if np.linalg.matrix_rank(gram, tol=1e-12 * max(1.0, np.abs(gram).max())) < size - 1:
                        continue
                    Q = np.linalg.solve(gram, D)  # mu = Q (x - p0)
                    proj = D.T @ Q
                else:
                    Q = np.zeros((0, d))
                    proj = np.zeros((d, d))
                faces.append((p0, Q, np.eye(d) - proj))
        return faces

    def exit_parameter(self, x: np.ndarray) -> np.ndarray:
        """sup{s >= 0 : s*x in body} for real direction vectors ``x`` (N, d)."""
        best = np.zeros(x.shape[0])
        eps2 = self.eps**2
        for p0, Q, perp in self._faces:
            # barycentric coordinates along the ray: lam = alpha + s*beta
            qv = x @ Q.T
            qp = Q @ p0
            alpha = np.concatenate([np.full((x.shape[0], 1), 1.0 + qp.sum()),
                                    np.broadcast_to(-qp, (x.shape[0], len(qp)))], axis=1)
            beta = np.concatenate([-qv.sum(axis=1, keepdims=True), qv], axis=1)
            lo = np.zeros(x.shape[0])
            hi = np.full(x.shape[0], np.inf)
            pos = beta > 1e-15
            neg = beta < -1e-15
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                ratio = -alpha / beta
            lo = np.maximum(lo, np.max(np.where(pos, ratio, -np.inf), axis=1))
            hi = np.minimum(hi, np.min(np.where(neg, ratio, np.inf), axis=1))
            flat_bad = np.any(~pos & ~neg & (alpha < -1e-12), axis=1)
            # squared distance to the affine hull: A s^2 - 2 B s + C
            a = x @ perp.T
            b = perp @ p0
            A = np.sum(a * a, axis=1)
            B = a @ b
            C = float(b @ b)
            disc = B * B - A * (C - eps2)
            small = A <= 1e-14 * np.maximum(np.sum(x * x, axis=1), 1e-300)
            with np.errstate(divide="ignore", invalid="ignore"):
                sq = np.sqrt(np.maximum(disc, 0.0))
                q_lo = np.where(small, -np.inf, (B - sq) / A)
                q_hi = np.where(small, np.inf, (B + sq) / A)
            q_ok = np.where(small, C < eps2, disc > 0)
            lo2 = np.maximum(lo, q_lo)
            hi2 = np.minimum(hi, q_hi)
            ok = q_ok & ~flat_bad & (lo2 <= hi2) & (hi2 > 0)
            best = np.where(ok, np.maximum(best, hi2), best)
        return best

    def _gauge(self, w):
        shape = w.shape[:-1]
        x = to_real(w).reshape(-1, 2 * self.dim)
        out = np.zeros(x.shape[0])
        nz = np.any(x != 0, axis=1)
        s = self.exit_parameter(x[nz])
        with np.errstate(divide="ignore"):
            out[nz] = 1.0 / s
        return out.reshape(shape)

    def to_json(self):
        pts = self.points
        if self.dim == 1:
            pts_json = [[float(z.real), float(z.imag)] for z in pts[:, 0]]
        else:
            pts_json = [[[float(z.real), float(z.imag)] for z in row] for row in pts]
        return {"kind": "hull_eps", "points": pts_json, "eps": self.eps}


def _hull_inradius(rel: np.ndarray) -> float:
    """Distance from the origin (centroid) to the hull boundary; 0 if degenerate."""
    k, d = rel.shape
    if k <= d:
        return 0.0
    try:
        hull = ConvexHull(rel)
    except QhullError:
        return 0.0
    # equations: normal . x + offset <= 0 inside
    return float(max(0.0, np.min(-hull.equations[:, -1])))


class ProductBody(StarBody):
    def __init__(self, b1: StarBody, b2: StarBody):
        if np.any(b1.center != 0) or np.any(b2.center != 0):
            raise GaugeError("product factors must be centred at 0")
        super().__init__(
            b1.dim + b2.dim,
            np.zeros(b1.dim + b2.dim, complex),
            min(b1.kernel_inradius, b2.kernel_inradius),
            float(np.hypot(b1.outradius, b2.outradius)),
            max(b1.lipschitz_bound, b2.lipschitz_bound),
            b1.convex and b2.convex,
            "product",
        )
        self.factors = (b1, b2)

    def _gauge(self, w):
        b1, b2 = self.factors
        return np.maximum(b1._gauge(w[..., : b1.dim]), b2._gauge(w[..., b1.dim:]))

    def to_json(self):
        return {"kind": "product", "factors": [f.to_json() for f in self.factors]}


def product_body(b1: StarBody, b2: StarBody) -> ProductBody:
    return ProductBody(b1, b2)


class ScaledBody(StarBody):
    """``center + factor * (M - center)``; gauge divided by ``factor``."""

    def __init__(self, base: StarBody, factor: float):
        if factor <= 0:
            raise GaugeError("scale factor must be positive")
        super().__init__(base.dim, base.center.copy(), base.kernel_inradius * factor,
                         base.outradius * factor, base.lipschitz_bound / factor,
                         base.convex, base.kind)
        self.base = base
        self.factor = factor

    def _gauge(self, w):
        return self.base._gauge(w) / self.factor

    def to_json(self):
        return {"kind": "scaled", "factor": self.factor, "base": self.base.to_json()}


class TranslatedBody(StarBody):
    def __init__(self, base: StarBody, shift: np.ndarray):
        super().__init__(base.dim, base.center + shift, base.kernel_inradius,
                         base.outradius, base.lipschitz_bound, base.convex, base.kind)
        self.base = base
        self.shift = shift

    def _gauge(self, w):
        return self.base._gauge(w)


class GaugeBody(StarBody):
    """Body ``{p < 1}`` defined by a continuous positively homogeneous ``p``."""

    def __init__(self, p: Callable, dim: int, rho: float, outr: float, convex: bool = False):
        super().__init__(dim, np.zeros(dim, complex), rho, outr, outr / rho**2, convex,
                         "gauge")
        self.p = p

    def _gauge(self, w):
        return np.asarray(self.p(w), dtype=float)


class MembershipBody(StarBody):
    """Star body known only through a membership oracle; gauge by ray bisection."""

    def __init__(self, contains: Callable, dim: int, rho: float, outr: float,
                 convex: bool = False):
        super().__init__(dim, np.zeros(dim, complex), rho, outr, outr / rho**2, convex,
                         "membership")
        self.contains = contains

    def _gauge(self, w):
        shape = w.shape[:-1]
        w = w.reshape(-1, self.dim)
        norm = np.linalg.norm(w, axis=-1)
        nz = norm > 0
        u = w[nz] / norm[nz, None]
        lo = np.full(u.shape[0], self.kernel_inradius)
        hi = np.full(u.shape[0], self.outradius)
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            inside = np.asarray(self.contains(u * mid[:, None]), dtype=bool)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        out = np.zeros(w.shape[0])
        out[nz] = norm[nz] / (0.5 * (lo + hi))
        return out.reshape(shape)


def random_unit_vectors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    x = rng.standard_normal((count, 2 * dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return to_complex(x)


def body_from_gauge(p: Callable, samples: int = 64, dim: int = 1, seed: int = 0,
                    convex: bool = False) -> GaugeBody:
    """Build ``{p < 1}``; spot-check homogeneity of ``p`` on random rays."""
    rng = np.random.default_rng(seed)
    u = random_unit_vectors(rng, samples, dim)
    r = rng.uniform(0.05, 20.0, samples)
    pu = np.asarray(p(u), dtype=float)
    pru = np.asarray(p(u * r[:, None]), dtype=float)
    err = np.abs(pru - r * pu) / np.maximum(1e-300, r * np.abs(pu))
    bad = np.flatnonzero(err > 1e-6)
    if bad.size:
        i = bad[0]
        raise GaugeError(f"homogeneity check failed on ray {u[i].tolist()} at r={r[i]:.6g}")
    if np.any(pu <= 0):
        raise GaugeError("gauge vanishes on a unit vector: body is unbounded")
    # sampled extremes are not bounds; pad by 2 so the bisection bracket holds
    return GaugeBody(p, dim, rho=0.5 / float(pu.max()), outr=2.0 / float(pu.min()),
                     convex=convex)


def hull_body(points, eps: float) -> EpsHull:
    return EpsHull(points, eps)


class ModulusBound:
    """Nondecreasing concave majorant of the gauge increment on a ball of radius ``hull_radius``."""

    def __init__(self, t: np.ndarray, values: np.ndarray, lipschitz: float):
        self.t = t
        self.values = values
        self.lipschitz = lipschitz

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.interp(t, self.t, self.values)
        tail = self.values[-1] + (t - self.t[-1]) * self._last_slope()
        return np.where(t <= self.t[-1], inside, tail)

    def _last_slope(self):
        dt = self.t[-1] - self.t[-2]
        return (self.values[-1] - self.values[-2]) / dt if dt > 0 else self.lipschitz


def _concave_majorant(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    hull = [0]
    for i in range(1, len(t)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies on or below the chord i0 -> i
            if (y[i1] - y[i0]) * (t[i] - t[i0]) <= (y[i] - y[i0]) * (t[i1] - t[i0]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(t, t[hull], y[hull])


def modulus_bound(body: StarBody, hull_radius: float, samples: int = 10_000,
                  seed: int = 0, bins: int = 256) -> ModulusBound:
    """Upper bound for the modulus of continuity of the gauge on ``ball(hull_radius)``.

    Convex bodies use the exact constant ``1/rho``. Other star bodies start from
    ``R/rho^2`` and are tightened by pair sampling plus a safety margin.
    """
    rho = body.kernel_inradius
    if not rho > 0:
        raise GaugeError("gauge modulus unavailable")
    L = body.lipschitz_bound
    t = np.linspace(0.0, 2.0 * hull_radius, bins + 1)
    linear = L * t
    if body.convex:
        return ModulusBound(t, linear, L)
    rng = np.random.default_rng(seed)
    d = body.dim
    u = random_unit_vectors(rng, samples, d) * (hull_radius * rng.uniform(0, 1, samples) ** (1 / (2 * d)))[:, None]
    step = random_unit_vectors(rng, samples, d) * rng.uniform(0, 2 * hull_radius, samples)[:, None]
    v = u + step
    keep = np.linalg.norm(v, axis=1) <= hull_radius
    u, v = u[keep], v[keep]
    dist = np.linalg.norm(u - v, axis=1)
    inc = np.abs(body._gauge(u) - body._gauge(v))
    idx = np.searchsorted(t, dist, side="left")
    emp = np.zeros_like(t)
    np.maximum.at(emp, np.minimum(idx, bins), inc)
    emp = np.maximum.accumulate(emp)
    margin = 1.25 * emp + 0.05 * linear
    bound = np.minimum(linear, margin)
    return ModulusBound(t, np.maximum.accumulate(_concave_majorant(t, bound)), L)


def body_from_json(data: dict, dim: int | None = None) -> StarBody:
    kind = data.get("kind")
    if kind == "ball":
        return Ball(float(data.get("radius", 1.0)), int(data.get("dim", dim or 1)))
    if kind == "polydisk":
        return Polydisk(data["radii"])
    if kind == "radial_profile":
        return RadialProfile(data["profile"])
    if kind == "hull_eps":
        pts = np.asarray(data["points"], dtype=float)
        pts = pts[..., 0] + 1j * pts[..., 1]
        return EpsHull(pts, float(data["eps"]))
    if kind == "product":
        f1, f2 = (body_from_json(f) for f in data["factors"])
        return ProductBody(f1, f2)
    if kind == "scaled":
        return ScaledBody(body_from_json(data["base"]), float(data["factor"]))
    raise GaugeError(f"unknown body kind: {kind!r}")
