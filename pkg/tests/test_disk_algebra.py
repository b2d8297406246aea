import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcinterp import disk_algebra as da
from rcinterp.disk_algebra import (
    Constant,
    DiskAlgebraError,
    Exp,
    Identity,
    Polynomial,
    RootFactor,
    Scale,
    cr_residual,
    lagrange_extension,
    min_supnorm_extension,
    mobius,
    node_from_json,
    node_set,
    peak_exponent,
    peak_function,
    polar_grid,
)

PEAK_SETS = {
    1: [0.0],
    2: [0.0, np.pi],
    4: [0.3, 1.9, 3.5, 5.0],
    8: list(np.linspace(0, 2 * np.pi, 8, endpoint=False) + 0.1),
}


def disk_points(rng, n):
    return np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))


def test_eval_examples():
    sq = Polynomial((0, 0, 1))
    assert da.eval(sq, 1j) == pytest.approx(-1)
    assert da.eval(mobius(0.0), 0.3 + 0.2j) == 0.3 + 0.2j
    f = Exp(Scale(-1, Constant(1) + Scale(-1, Identity())))
    assert da.eval(f, 0) == pytest.approx(np.exp(-1), abs=1e-15)
    with pytest.raises(DiskAlgebraError, match="outside closed disk"):
        da.eval(sq, 1.1)


@pytest.mark.parametrize("m", sorted(PEAK_SETS))
def test_peak_function(m):
    S = node_set(PEAK_SETS[m])
    chi = peak_function(S)
    assert np.all(chi(S.points) == 1)
    z = polar_grid(200, 200)
    off = S.distance(z) >= 0.01
    mu = 1 - np.abs(chi(z[off])).max()
    assert mu > 0
    assert cr_residual(chi) <= 1e-6


def test_peak_duplicates_rejected():
    with pytest.raises(DiskAlgebraError, match="duplicate"):
        node_set([0.0, 2 * np.pi])


@given(st.lists(st.floats(0, 2 * np.pi, exclude_max=True), min_size=1, max_size=6, unique=True))
def test_peak_modulus_below_one_off_nodes(angles):
    S = node_set(angles, sep_min=0)
    if len(S) > 1 and S.min_separation() < 1e-3:
        return
    z = disk_points(np.random.default_rng(0), 500)
    z = z[S.distance(z) > 1e-3]
    P = peak_exponent(S)(z)
    assert np.all(P.real > 0)
    assert np.all(np.abs(peak_function(S)(z)) < 1)


def test_principal_branch_safety():
    rng = np.random.default_rng(1)
    z = disk_points(rng, 10_000)
    z[:2000] /= np.abs(z[:2000])  # include the boundary
    for a in rng.uniform(0, 2 * np.pi, 8):
        assert RootFactor(a, 3).base(z).real.min() >= -1e-15


@given(st.floats(-0.99, 0.99), st.floats(0, 2 * np.pi))
def test_mobius_inverse_and_boundary(a, phi):
    g = mobius(a, np.exp(1j * phi))
    rng = np.random.default_rng(2)
    z = disk_points(rng, 1000)
    assert np.max(np.abs(g(g.inverse()(z)) - z)) <= 1e-12 / (1 - abs(a))
    w = np.exp(2j * np.pi * rng.uniform(0, 1, 1000))
    assert np.max(np.abs(np.abs(g(w)) - 1)) <= 1e-12


def test_mobius_collapses_small_disk():
    z = 0.5 * disk_points(np.random.default_rng(3), 2000)
    spread = [np.max(np.abs(mobius(a)(z) - 1)) for a in (-0.5, -0.9, -0.99)]
    assert spread[0] > spread[1] > spread[2]
    with pytest.raises(DiskAlgebraError):
        mobius(1.0)


def test_lagrange_examples():
    c = lagrange_extension(node_set([0.0]), [5])
    assert c(0.3j) == 5
    p = lagrange_extension(node_set([0.0, np.pi]), [1, -1])
    z = disk_points(np.random.default_rng(4), 50)
    assert np.allclose(p(z), z, atol=1e-14)
    with pytest.raises(DiskAlgebraError, match="size mismatch"):
        lagrange_extension(node_set([0.0]), [1, 2])
    with pytest.raises(DiskAlgebraError, match="ill-conditioned nodes"):
        lagrange_extension(node_set([0.0, 1e-5]), [1, 2])


@given(st.lists(st.complex_numbers(max_magnitude=1e3), min_size=1, max_size=10))
def test_lagrange_residual(values):
    S = node_set(np.linspace(0, 2 * np.pi, len(values), endpoint=False) + 0.2)
    p = lagrange_extension(S, values)
    v = np.asarray(values)
    assert np.max(np.abs(p(S.points) - v)) <= 1e-12 * (1 + np.abs(v).max())


def test_min_supnorm_examples():
    p, b = min_supnorm_extension(node_set([0.0]), [1], degree=3)
    # optimal set is flat near the constant; the tie-break lands within solver slack
    assert np.allclose(p(polar_grid(5, 8)), 1, atol=1e-4)
    assert b == pytest.approx(1, abs=1e-7)
    p, b = min_supnorm_extension(node_set([0.0, np.pi]), [1, 1], degree=1)
    assert b == pytest.approx(1, abs=1e-7)
    with pytest.raises(DiskAlgebraError, match="infeasible"):
        min_supnorm_extension(node_set([0.0, 1.0, 2.0]), [1, 2, 3], degree=1)


def test_min_supnorm_bound_monotone_in_degree():
    S = node_set([0.3, 1.9, 3.5, 5.0])
    v = np.array([1, 1j, -1, -1j])
    bounds = [min_supnorm_extension(S, v, d, grid=256)[1] for d in (3, 5, 8, 12)]
    assert bounds[0] >= 1
    assert all(b1 <= b0 + 1e-6 for b0, b1 in zip(bounds, bounds[1:]))
    assert bounds[-1] < bounds[0]


def test_cr_residual_examples():
    assert cr_residual(Polynomial((0, 0, 0, 1))) <= 1e-8
    assert cr_residual(lambda z: np.conj(z)) == pytest.approx(2, abs=1e-6)
    assert cr_residual(peak_function(node_set([0.0]))) <= 1e-6


def test_json_round_trip():
    S = node_set([0.3, 1.9, 3.5])
    f = Exp(Scale(-1, peak_exponent(S))) * lagrange_extension(S, [1, 2j, 3]) + mobius(-0.4, 1j)
    g = node_from_json(f.to_json())
    z = disk_points(np.random.default_rng(5), 200)
    assert np.array_equal(f(z), g(z))
    with pytest.raises(DiskAlgebraError, match="unknown node"):
        node_from_json({"node": "nope"})
