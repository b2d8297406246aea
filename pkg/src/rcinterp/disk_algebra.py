"""Disk-algebra functions as immutable expression DAGs.

Every node is holomorphic on the open disk and continuous on the closed
disk by construction, so membership in the disk algebra is structural.
Nodes are vectorised over numpy arrays and round-trip through JSON.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, ClassVar, Sequence

import numpy as np

DISK_TOL = 1e-12
_ZERO_BASE = 8 * np.finfo(float).eps

NODE_TYPES: dict[str, type] = {}


def register(cls):
    NODE_TYPES[cls.tag] = cls
    return cls


class DiskAlgebraError(ValueError):
    pass


def _c(x) -> list[float]:
    return [float(np.real(x)), float(np.imag(x))]


def _from_c(pair) -> complex:
    return complex(pair[0], pair[1])


class HoloFunction:
    tag: ClassVar[str] = "abstract"

    def __call__(self, z):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_json(cls, data: dict) -> "HoloFunction":
        raise NotImplementedError

    # convenience combinators
    def __add__(self, other):
        return Sum((self, lift(other)))

    def __radd__(self, other):
        return Sum((lift(other), self))

    def __mul__(self, other):
        if isinstance(other, HoloFunction):
            return Product((self, other))
        return Scale(complex(other), self)

    __rmul__ = __mul__


def lift(x) -> HoloFunction:
    return x if isinstance(x, HoloFunction) else Constant(complex(x))


def node_from_json(data: dict) -> HoloFunction:
    try:
        cls = NODE_TYPES[data["node"]]
    except KeyError as exc:
        raise DiskAlgebraError(f"unknown node tag {data.get('node')!r}") from exc
    return cls.from_json(data)


def eval(f: HoloFunction, z):  # noqa: A001 - mirrors the operation name
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1 + DISK_TOL):
        raise DiskAlgebraError("outside closed disk")
    return f(z)


@register
@dataclass(frozen=True)
class Identity(HoloFunction):
    tag: ClassVar[str] = "z"

    def __call__(self, z):
        return np.asarray(z, dtype=complex)

    def to_json(self):
        return {"node": self.tag}

    @classmethod
    def from_json(cls, data):
        return cls()


@register
@dataclass(frozen=True)
class Constant(HoloFunction):
    value: complex
    tag: ClassVar[str] = "const"

    def __call__(self, z):
        return np.full(np.shape(z), self.value, dtype=complex)

    def to_json(self):
        return {"node": self.tag, "value": _c(self.value)}

    @classmethod
    def from_json(cls, data):
        return cls(_from_c(data["value"]))


@register
@dataclass(frozen=True)
class Polynomial(HoloFunction):
    """Ascending monomial coefficients, Horner evaluation."""

    coeffs: tuple
    tag: ClassVar[str] = "poly"

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c in reversed(self.coeffs):
            out = out * z + c
        return out

    def to_json(self):
        return {"node": self.tag, "coeffs": [_c(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, data):
        return cls(tuple(_from_c(c) for c in data["coeffs"]))


@register
@dataclass(frozen=True)
class Barycentric(HoloFunction):
    """Lagrange interpolant in barycentric form; exact at the nodes."""

    nodes: tuple
    values: tuple
    tag: ClassVar[str] = "lagrange"

    @property
    def weights(self) -> np.ndarray:
        s = np.asarray(self.nodes, dtype=complex)
        diff = s[:, None] - s[None, :]
        np.fill_diagonal(diff, 1.0)
        return 1.0 / np.prod(diff, axis=1)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        s = np.asarray(self.nodes, dtype=complex)
        v = np.asarray(self.values, dtype=complex)
        if len(s) == 1:
            return np.full(z.shape, v[0], dtype=complex)
        d = z[..., None] - s
        hit = d == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            k = self.weights / d
            out = np.sum(k * v, axis=-1) / np.sum(k, axis=-1)
        if np.any(hit):
            which = np.argmax(hit, axis=-1)
            out = np.where(np.any(hit, axis=-1), v[which], out)
        return out

    def coefficients(self) -> np.ndarray:
        s = np.asarray(self.nodes, dtype=complex)
        V = np.vander(s, increasing=True)
        return np.linalg.solve(V, np.asarray(self.values, dtype=complex))

    def to_json(self):
        return {"node": self.tag, "nodes": [_c(s) for s in self.nodes],
                "values": [_c(v) for v in self.values]}

    @classmethod
    def from_json(cls, data):
        return cls(tuple(_from_c(s) for s in data["nodes"]),
                   tuple(_from_c(v) for v in data["values"]))


@register
@dataclass(frozen=True)
class Mobius(HoloFunction):
    """Disk automorphism ``(z - a z0) / (1 - a conj(z0) z)`` fixing ``z0`` and ``-z0``."""

    a: float
    z0: complex = 1.0
    tag: ClassVar[str] = "mobius"

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise DiskAlgebraError("Mobius parameter must satisfy |a| < 1")
        if abs(abs(self.z0) - 1) > 1e-12:
            raise DiskAlgebraError("Mobius fixed point must be unimodular")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (z - self.a * self.z0) / (1 - self.a * np.conj(self.z0) * z)

    def inverse(self) -> "Mobius":
        return Mobius(-self.a, self.z0)

    def to_json(self):
        return {"node": self.tag, "a": self.a, "z0": _c(self.z0)}

    @classmethod
    def from_json(cls, data):
        return cls(float(data["a"]), _from_c(data["z0"]))


def mobius(a: float, z0: complex = 1.0) -> Mobius:
    return Mobius(float(a), complex(z0))


@register
@dataclass(frozen=True)
class RootFactor(HoloFunction):
    """Principal ``(1 - conj(s) z)^(1/m)`` for unimodular ``s``.

    The base has nonnegative real part on the closed disk and vanishes only
    at ``s``; ``0^(1/m)`` is taken as 0.
    """

    angle: float
    m: int
    tag: ClassVar[str] = "root"

    def base(self, z):
        return 1 - np.exp(-1j * self.angle) * np.asarray(z, dtype=complex)

    def __call__(self, z):
        b = self.base(z)
        b = np.where(np.abs(b) <= _ZERO_BASE, 0.0, b)
        # clip rounding-level negative real parts back onto the imaginary axis
        b = np.where(b.real < 0, 1j * b.imag, b)
        return b ** (1.0 / self.m)

    def to_json(self):
        return {"node": self.tag, "angle": self.angle, "m": self.m}

    @classmethod
    def from_json(cls, data):
        return cls(float(data["angle"]), int(data["m"]))


@register
@dataclass(frozen=True)
class Sum(HoloFunction):
    terms: tuple
    tag: ClassVar[str] = "sum"

    def __call__(self, z):
        out = np.zeros(np.shape(z), dtype=complex)
        for t in self.terms:
            out = out + t(z)
        return out

    def to_json(self):
        return {"node": self.tag, "terms": [t.to_json() for t in self.terms]}

    @classmethod
    def from_json(cls, data):
        return cls(tuple(node_from_json(t) for t in data["terms"]))


@register
@dataclass(frozen=True)
class Product(HoloFunction):
    factors: tuple
    tag: ClassVar[str] = "prod"

    def __call__(self, z):
        out = np.ones(np.shape(z), dtype=complex)
        for f in self.factors:
            out = out * f(z)
        return out

    def to_json(self):
        return {"node": self.tag, "factors": [f.to_json() for f in self.factors]}

    @classmethod
    def from_json(cls, data):
        return cls(tuple(node_from_json(f) for f in data["factors"]))


@register
@dataclass(frozen=True)
class Scale(HoloFunction):
    factor: complex
    inner: HoloFunction
    tag: ClassVar[str] = "scale"

    def __call__(self, z):
        return self.factor * self.inner(z)

    def to_json(self):
        return {"node": self.tag, "factor": _c(self.factor), "inner": self.inner.to_json()}

    @classmethod
    def from_json(cls, data):
        return cls(_from_c(data["factor"]), node_from_json(data["inner"]))


@register
@dataclass(frozen=True)
class Exp(HoloFunction):
    inner: HoloFunction
    tag: ClassVar[str] = "exp"

    def __call__(self, z):
        return np.exp(self.inner(z))

    def to_json(self):
        return {"node": self.tag, "inner": self.inner.to_json()}

    @classmethod
    def from_json(cls, data):
        return cls(node_from_json(data["inner"]))


@register
@dataclass(frozen=True)
class Compose(HoloFunction):
    """``outer(inner(z))``; ``inner`` must map the closed disk into itself."""

    outer: HoloFunction
    inner: HoloFunction
    tag: ClassVar[str] = "compose"

    def __call__(self, z):
        return self.outer(self.inner(z))

    def to_json(self):
        return {"node": self.tag, "outer": self.outer.to_json(), "inner": self.inner.to_json()}

    @classmethod
    def from_json(cls, data):
        return cls(node_from_json(data["outer"]), node_from_json(data["inner"]))


@dataclass(frozen=True)
class VectorFunction:
    """C^n-valued map with disk-algebra coordinates."""

    components: tuple

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, z):
        return np.stack([c(z) for c in self.components], axis=-1)

    def to_json(self):
        return {"components": [c.to_json() for c in self.components]}

    @classmethod
    def from_json(cls, data):
        return cls(tuple(node_from_json(c) for c in data["components"]))


# --- node sets and constructions -------------------------------------------

@dataclass(frozen=True)
class NodeSet:
    angles: tuple
    sep_min: float = 1e-3

    def __post_init__(self):
        a = np.mod(np.asarray(self.angles, dtype=float), 2 * np.pi)
        if a.size == 0:
            raise DiskAlgebraError("node set must be nonempty")
        object.__setattr__(self, "angles", tuple(float(x) for x in a))
        if a.size > 1 and self.min_separation() == 0:
            raise DiskAlgebraError("duplicate nodes")

    @property
    def points(self) -> np.ndarray:
        return np.exp(1j * np.asarray(self.angles))

    def __len__(self):
        return len(self.angles)

    def min_separation(self) -> float:
        s = self.points
        if len(s) < 2:
            return np.inf
        d = np.abs(s[:, None] - s[None, :])
        np.fill_diagonal(d, np.inf)
        return float(d.min())

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.min(np.abs(z[..., None] - self.points), axis=-1)


def node_set(angles: Sequence[float], sep_min: float = 1e-3) -> NodeSet:
    return NodeSet(tuple(angles), sep_min)


def peak_exponent(S: NodeSet) -> HoloFunction:
    """``prod_j (1 - conj(s_j) z)^(1/m)``: real part > 0 off ``S``, zero on ``S``."""
    m = len(S)
    return Product(tuple(RootFactor(a, m) for a in S.angles))


def peak_function(S: NodeSet) -> HoloFunction:
    """``exp(-prod_j (1 - conj(s_j) z)^(1/m))``: equals 1 on ``S``, modulus < 1 elsewhere."""
    return Exp(Scale(-1.0, peak_exponent(S)))


def lagrange_extension(S: NodeSet, values: Sequence[complex]) -> Barycentric:
    values = np.asarray(values, dtype=complex)
    if values.shape != (len(S),):
        raise DiskAlgebraError("size mismatch between nodes and values")
    if len(S) > 1 and S.min_separation() < S.sep_min:
        raise DiskAlgebraError("ill-conditioned nodes")
    return Barycentric(tuple(complex(s) for s in S.points), tuple(complex(v) for v in values))


def boundary_grid(count: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(count) / count)


def min_supnorm_extension(S: NodeSet, values: Sequence[complex], degree: int,
                          grid: int = 512, rounds: int = 4) -> tuple[Polynomial, float]:
    """Polynomial of ``degree`` interpolating ``values`` with near-minimal boundary sup norm.

    Solves the discretised problem ``min t s.t. |p(w)| <= t`` over ``grid``
    boundary points plus ``S``, then adds the worst points of a 16x refined
    grid and re-solves (a few exchange rounds). The returned bound is the max
    of ``|p|`` on the refined grid, an upper-bound estimate of the sup norm.
    """
    import cvxpy as cp

    values = np.asarray(values, dtype=complex)
    if len(values) != len(S):
        raise DiskAlgebraError("size mismatch between nodes and values")
    if degree < len(S) - 1:
        raise DiskAlgebraError("infeasible size: degree < |S| - 1")
    fine = boundary_grid(16 * grid)
    Vs = np.vander(S.points, degree + 1, increasing=True)
    Vf = np.vander(fine, degree + 1, increasing=True)
    w = np.concatenate([boundary_grid(grid), S.points])
    c = cp.Variable(degree + 1, complex=True)
    for _ in range(rounds):
        Vw = np.vander(w, degree + 1, increasing=True)
        t = cp.Variable()
        prob = cp.Problem(cp.Minimize(t), [Vs @ c == values, cp.abs(Vw @ c) <= t])
        prob.solve(solver=cp.CLARABEL)
        if c.value is None:
            raise DiskAlgebraError(f"sup-norm program failed: {prob.status}")
        # minimisers are not unique; among near-optimal ones prefer low frequencies
        cap = float(t.value) * (1 + 1e-7) + 1e-9
        tie = cp.Problem(cp.Minimize(cp.sum_squares(cp.multiply(np.arange(degree + 1), c))),
                         [Vs @ c == values, cp.abs(Vw @ c) <= cap])
        with warnings.catch_warnings():
            # an inaccurate tie-break is harmless: the bound below is measured directly
            warnings.simplefilter("ignore", UserWarning)
            tie.solve(solver=cp.CLARABEL)
        if c.value is None:
            raise DiskAlgebraError(f"sup-norm program failed: {tie.status}")
        over = np.abs(Vf @ c.value) - cap
        worst = np.argsort(over)[::-1][:4 * (degree + 1)]
        worst = worst[over[worst] > 0]
        if worst.size == 0:
            break
        w = np.concatenate([w, fine[worst]])
    coeffs = np.asarray(c.value, dtype=complex)
    # re-impose exact interpolation (removes solver tolerance from node residuals)
    resid = values - Vs @ coeffs
    coeffs = coeffs + np.linalg.lstsq(Vs, resid, rcond=None)[0]
    poly = Polynomial(tuple(complex(x) for x in coeffs))
    bound = max(float(np.max(np.abs(Vf @ coeffs))), float(np.max(np.abs(values))))
    return poly, bound


def polar_grid(radial: int, angular: int, rmax: float = 1.0) -> np.ndarray:
    r = np.linspace(0.0, rmax, radial)
    th = 2 * np.pi * np.arange(angular) / angular
    return (r[:, None] * np.exp(1j * th[None, :])).ravel()


def _diff4(f: Callable, z: np.ndarray, h: complex) -> np.ndarray:
    return (8 * (f(z + h) - f(z - h)) - (f(z + 2 * h) - f(z - 2 * h))) / (12 * abs(h))


def cr_residual(f: Callable, grid: int = 64, step: float = 1e-5, rmax: float = 0.95) -> float:
    """Max normalised Cauchy-Riemann defect ``|f_x + i f_y|`` on an interior polar grid."""
    z = polar_grid(grid, grid, rmax)
    fx = _diff4(f, z, step)
    fy = _diff4(f, z, 1j * step)
    scale = 0.5 * (np.abs(fx) + np.abs(fy))
    # below rounding noise the quotient carries no information
    noise = 1e-9 * (1 + np.abs(f(z))) / step
    ok = scale > noise
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(fx + 1j * fy)[ok] / scale[ok]))
