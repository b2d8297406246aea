import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcinterp.conformal import (
    ConformalError,
    CuspProfile,
    HornMap,
    HornStage,
    ZipperMap,
    _solve_ell,
    boundary_correspondence,
    build_cusp_map,
    calibration_map,
    calibration_report,
    containment_margins,
    disk_from_strip,
    map_eval,
    parabolic_profile,
    strip_from_disk,
    strip_from_exponent,
    verify_containment,
)
from rcinterp.disk_algebra import Constant, Identity, Scale, cr_residual, node_from_json

PROFILE = parabolic_profile(np.pi / 8)


@pytest.fixture(scope="module")
def horn():
    return build_cusp_map(PROFILE, N=1024, shrink=0.2)


def disk_points(rng, n, rmax=1.0):
    return rmax * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))


def test_tips_are_prescribed(horn):
    assert abs(map_eval(horn, horn.z0)) <= 1e-6
    assert abs(map_eval(horn, horn.z1) - 1) <= 1e-6


def test_radial_approach_to_tips(horn):
    """The horn has a corner of opening ``slope`` at 1, so ``|1 - G(1-h)| ~ h^(slope/pi)``."""
    h = 10.0 ** -np.arange(4, 16, 2)
    e1 = np.abs(1 - horn.forward(horn.z1 * (1 - h)))
    e0 = np.abs(horn.forward(horn.z0 * (1 - h)))
    assert np.all(np.diff(e1) < 0) and np.all(np.diff(e0) < 0)
    rate = np.diff(np.log(e1)) / np.diff(np.log(h))
    assert np.all(np.diff(rate) > 0) and rate[-1] < horn.slope / np.pi


def test_parabolic_accuracy(horn):
    assert horn.accuracy <= 1e-3
    assert horn.resolution == 1024


def test_containment_on_samples(horn):
    rep = verify_containment(horn, PROFILE, grid=100)
    assert rep["samples"] >= 10_000
    assert rep["ok"]
    assert rep["min_angle_margin"] >= 0 and rep["min_arg"] >= -1e-12


def test_exactly_conformal(horn):
    assert cr_residual(horn.forward) <= 1e-6


def test_injectivity(horn):
    rng = np.random.default_rng(0)
    z = disk_points(rng, 10_000, 0.999)
    w = horn.forward(z)
    order = np.argsort(w.real)
    # close images must come from close sources; compare neighbours in a sort
    for shift in range(1, 30):
        a, b = order[:-shift], order[shift:]
        near = np.abs(w[a] - w[b]) <= 1e-12
        assert np.all(np.abs(z[a] - z[b])[near] <= 1e-9)


def test_cyclic_order(horn):
    t = horn.node_params
    n_seg = (len(t) - 2) // 2
    # along the real edge the strip parameter increases, back along the arc it decreases
    assert np.all(np.diff(t[1:n_seg + 1].real) > 0)
    assert np.all(np.abs(t[1:n_seg + 1].imag) < 1e-9)
    assert np.all(np.diff(t[n_seg + 2:].real) < 0)
    ang = np.array([a for _, _, a in boundary_correspondence(horn)])
    # counterclockwise from -pi (tip 0) through 0 (tip 1) to pi; deep nodes round to +-pi
    assert np.all(np.diff(ang) >= 0)
    assert ang[0] == -np.pi and ang[n_seg + 1] == 0 and ang[-1] <= np.pi


@given(st.floats(0, 0.999), st.floats(0, 2 * np.pi))
def test_inverse_round_trip(r, phi):
    G = HornMap(0.8 * PROFILE.fit_coefficient())
    z = r * np.exp(1j * phi)
    assert abs(G.inverse(G.forward(z)) - z) <= 1e-8


def test_boundary_maps_to_horn_curve(horn):
    # nodes are exactly hit on the real segment and near the shrunk curve on the arc
    t = horn.node_params
    back = horn.from_strip(t[1:-1])
    assert np.max(np.abs(back - horn.node_images[1:-1])) <= 1e-9


def test_map_eval_outside_disk(horn):
    with pytest.raises(ConformalError, match="outside closed disk"):
        map_eval(horn, 1.01)


def test_build_errors():
    with pytest.raises(ConformalError, match="N too small"):
        build_cusp_map(PROFILE, N=16)


def test_zero_shrink_is_reported():
    G = HornMap(PROFILE.fit_coefficient(), PROFILE)
    rep = verify_containment(G, PROFILE, grid=60)
    assert isinstance(rep["ok"], bool)
    assert set(rep) >= {"min_angle_margin", "min_arg", "max_modulus"}
    try:
        build_cusp_map(PROFILE, N=256, shrink=0.0)
    except ConformalError as exc:
        assert "insufficient shrink or resolution" in str(exc)


@given(st.floats(0.05, 0.6), st.floats(0.5, 3.0), st.floats(0.05, 0.5))
def test_general_profiles_are_contained(c, power, shrink):
    prof = CuspProfile.from_callable(lambda r: c * (r * (1 - r)) ** power * 4 ** (power - 1))
    if prof.fit_coefficient() <= 0:
        return
    G = build_cusp_map(prof, N=128, shrink=shrink, audit_grid=40)
    vals = G.forward(disk_points(np.random.default_rng(1), 2000))
    upper, lower = containment_margins(vals, prof)
    assert upper.min() >= -1e-9 and lower.min() >= -1e-9


@given(st.complex_numbers(max_magnitude=1e6))
def test_solve_ell(v):
    ell = _solve_ell(np.array([v]))[0]
    assert abs(np.exp(ell) + ell - v) <= 1e-12 * (1 + abs(v))


def test_solve_ell_batch_independent():
    v = np.random.default_rng(2).standard_normal(1000) * 50 + 1j
    full = _solve_ell(v)
    assert np.array_equal(full[:7], _solve_ell(v[:7]))


@given(st.floats(0, 0.999), st.floats(-np.pi, np.pi))
def test_strip_coordinates_invert(r, phi):
    z = r * np.exp(1j * phi)
    u = strip_from_disk(z)
    assert -1e-12 <= u.imag <= 1 + 1e-12
    assert abs(disk_from_strip(u) - z) <= 1e-12


@given(st.floats(1e-3, 30), st.floats(-1.5, 1.5))
def test_strip_from_exponent(x, y):
    P = x + 1j * y * x  # right half-plane
    direct = strip_from_disk(np.exp(-P))
    assert abs(strip_from_exponent(P) - direct) <= 1e-9 * (1 + abs(direct))


def test_horn_stage_matches_mobius_composition():
    G = HornMap(0.3)
    P = Scale(0.5, Constant(1) + Scale(-1, Identity()))  # Re P >= 0 on the disk
    stage = HornStage(0.3, 1.2, P)
    a = stage.mobius_parameter
    assert a == pytest.approx(-np.tanh(0.6 * np.pi))
    z = disk_points(np.random.default_rng(3), 500)
    x = np.exp(-P(z))
    direct = G.forward((x + a) / (1 + a * x))
    assert np.max(np.abs(stage(z) - direct)) <= 1e-9
    again = node_from_json(stage.to_json())
    assert np.array_equal(again(z), stage(z))
    assert stage(np.array([1.0]))[0] == 1


def test_calibration():
    rep = calibration_report(N=1024, points=1000)
    assert rep["max_rotation_error"] <= 1e-4
    assert rep["max_modulus"] <= 1
    assert rep["inverse_roundtrip"] <= 1e-8


def test_zipper_hits_nodes():
    t = 2 * np.pi * np.arange(200) / 200
    nodes = np.cos(t) + 0.6j * np.sin(t)  # ellipse
    Z = ZipperMap(nodes)
    assert abs(Z.forward(0)) <= 1e-12
    assert np.all(np.diff(np.unwrap(Z.preimages)) > 0)
    back = Z.forward(np.exp(1j * Z.preimages) * (1 - 1e-12))
    assert np.max(np.abs(back - nodes)) <= 1e-9
    z = 0.999 * np.exp(1j * np.linspace(0, 2 * np.pi, 500))
    assert np.max(np.abs(Z.inverse(Z.forward(z)) - z)) <= 1e-10
    assert cr_residual(Z.forward, rmax=0.9) <= 1e-6


def test_calibration_map_contained():
    Z = calibration_map(256)
    ring = np.exp(2j * np.pi * np.arange(2048) / 2048)
    assert np.max(np.abs(map_eval(Z, ring))) <= 1


def test_profile_validation():
    r = np.linspace(0, 1, 5)
    with pytest.raises(ConformalError):
        CuspProfile(r, np.array([0, 0.1, 0.1, 0.1, 0.1]))
    with pytest.raises(ConformalError):
        CuspProfile(r, np.array([0, 0.1, 1.0, 0.1, 0]))
    with pytest.raises(ConformalError):
        CuspProfile(r, np.array([0, 0.1, 0, 0.1, 0]))
    p = CuspProfile.from_json(PROFILE.to_json())
    assert np.array_equal(p.theta, PROFILE.theta)
    # piecewise-linear interpolation sits just under the parabola
    assert PROFILE.fit_coefficient() == pytest.approx(np.pi / 8, rel=1e-5)
