import json
from dataclasses import replace

import numpy as np
import pytest

from rcinterp.conformal import build_cusp_map, containment_margins, parabolic_profile
from rcinterp.disk_algebra import node_set, polar_grid
from rcinterp.engine import (
    EngineError,
    InterpolationProblem,
    assemble_extension,
    audit_margins,
    build_h_eps,
    convex_hull_extension,
    linear_vector_extension,
    result_from_json,
)
from rcinterp.problems import regression_body, regression_problem
from rcinterp.reporting import dumps
from rcinterp.star_body import Ball, Polydisk

SQUARE_NODES = [0.0, np.pi / 2, np.pi, 1.5 * np.pi]


@pytest.fixture(scope="module")
def disk_one(small_config):
    p = InterpolationProblem(node_set([0.0]), np.array([1.0]), Ball(1.0, 1), small_config, "disk-1")
    return p, assemble_extension(p)


@pytest.fixture(scope="module")
def product_four(small_config):
    p = regression_problem("product", 4, small_config)
    return p, assemble_extension(p)


def test_linear_extension_examples():
    v = np.array([[0.3 + 0.4j, -1.0]])
    g, hull = linear_vector_extension(node_set([0.0]), v)
    z = polar_grid(5, 8)
    assert np.allclose(g(z), v[0]) and hull["m_norm"] == pytest.approx(np.linalg.norm(v))
    g, hull = linear_vector_extension(node_set([0.0, np.pi]), np.vstack([v, -v]))
    assert np.allclose(g(z), z[:, None] * v[0], atol=1e-14)
    assert hull["m_norm"] == pytest.approx(np.linalg.norm(v))


def test_linear_extension_grid_refinement():
    f = np.random.default_rng(0).standard_normal((4, 2)) * (1 + 1j)
    S = node_set([0.3, 1.9, 3.5, 5.0])
    coarse = linear_vector_extension(S, f, angular=512)[1]["m_norm"]
    fine = linear_vector_extension(S, f, angular=4096)[1]["m_norm"]
    assert abs(coarse - fine) <= 0.01 * fine


def test_h_eps_examples():
    S = node_set([0.0])
    prof = parabolic_profile(np.pi / 16)
    G = build_cusp_map(prof, N=256)
    h, info = build_h_eps(S, prof, 0.25, np.array([0j]), G)
    assert abs(h(np.array([0j]))[0]) <= 0.25
    assert h(S.points)[0] == 1
    z = polar_grid(60, 120)
    vals = h(z)
    upper, lower = containment_margins(vals, prof)
    assert upper.min() >= -1e-12 and lower.min() >= -1e-12
    assert np.all(np.abs(vals[S.distance(z) > 1e-3]) < 1)
    with pytest.raises(EngineError, match="E touches S"):
        build_h_eps(S, prof, 0.25, np.array([1 - 1e-9 + 0j]), G)
    with pytest.raises(EngineError, match="eps must lie"):
        build_h_eps(S, prof, 1.5, np.array([0j]), G)


def test_classical_disk_case(disk_one):
    p, res = disk_one
    rep = res.report
    assert res.h(p.S.points)[0, 0] == 1
    assert rep["ok"] and rep["interior_margin"] > 0
    assert rep["interp_residual"] <= 1e-8


def test_regression_problem_report(product_four):
    p, res = product_four
    rep = res.report
    assert rep["ok"], [k for k, v in rep["checks"].items() if not v]
    assert rep["interp_residual"] <= rep["interp_tolerance"]
    assert rep["chain_min_gap"] >= -1e-9 and rep["chain_eps_min_gap"] >= -1e-9
    assert all(e["ok"] for e in rep["eps_recursion"])


def test_stage_invariants(product_four):
    _, res = product_four
    for st in res.report["stages"]:
        assert st["min_angle_margin"] >= -1e-9 and st["min_arg"] >= -1e-9
        assert st["max_abs"] <= 1 and st["max_abs_on_E"] <= st["eps"]
        assert st["interior_max"] <= st["boundary_max"] + 1e-6
    assert res.report["monotone_U"]
    assert sum(res.schedule.weights) == 1.0


def test_degenerate_and_outside_data(small_config):
    S = node_set([0.0, np.pi])
    with pytest.raises(EngineError, match="degenerate data"):
        assemble_extension(InterpolationProblem(S, np.zeros(2), Ball(1.0, 1), small_config))
    with pytest.raises(EngineError, match="outside the closed body"):
        assemble_extension(InterpolationProblem(S, np.array([1.5, 0.2]), Ball(1.0, 1), small_config))
    with pytest.raises(EngineError, match="does not match"):
        InterpolationProblem(S, np.zeros((2, 2)), Ball(1.0, 1), small_config)
    huge = replace(small_config, delta=10.0)
    with pytest.raises(EngineError, match="U must be proper"):
        assemble_extension(InterpolationProblem(S, np.array([1.0, 0.5]), Ball(1.0, 1), huge))


def test_interior_data_stays_below_rho(small_config):
    p = regression_problem("polydisk", 2, small_config, scale=0.6)
    rho = float(p.data_gauges().max())
    assert rho == pytest.approx(0.6)
    rep = assemble_extension(p).report
    assert rep["ok"] and rep["max_gauge_off_collar"] < rho


def test_scaling_equivariance(small_config):
    S = node_set([0.3, 1.9, 3.5, 5.0])
    base = regression_problem("polydisk", 4, small_config)
    r = 3.7
    scaled = InterpolationProblem(S, r * base.f_values, Polydisk([r, 0.5 * r]), small_config)
    a, b = assemble_extension(base).report, assemble_extension(scaled).report
    assert a["interior_margin"] == pytest.approx(b["interior_margin"], abs=1e-9)
    assert a["chain_min_gap"] == pytest.approx(b["chain_min_gap"], abs=1e-9)


def test_json_round_trip_reproduces_audit(product_four):
    p, res = product_four
    again = result_from_json(json.loads(dumps(res.to_json())))
    rep = audit_margins(again, p)
    assert json.loads(dumps(rep)) == json.loads(dumps(res.report))


def test_thread_count_does_not_change_results(small_config):
    reports = []
    for threads in (1, 4):
        cfg = replace(small_config, threads=threads, grid_radial=160, grid_angular=128)
        reports.append(dumps(assemble_extension(regression_problem("stadium", 2, cfg)).to_json()))
    assert reports[0] == reports[1]


@pytest.mark.parametrize("name,values,eps", [
    ("segment", [1.0, -1.0], 0.5),
    ("square", [1, 1j, -1, -1j], 0.25),
])
def test_hull_problems(name, values, eps, small_config):
    nodes = [0.0, np.pi] if len(values) == 2 else SQUARE_NODES
    res = convex_hull_extension(node_set(nodes), np.array(values), eps, small_config, name)
    assert res.ok and res.report["interior_margin"] > 0
    if name == "segment":
        # z is no witness: z = i sits at distance 1 from the segment, outside the stadium
        assert regression_body("stadium").gauge([1j]) == pytest.approx(2.0)


def test_hull_constant_data(small_config):
    v = 0.3 + 0.1j
    res = convex_hull_extension(node_set([0.0, 2.0]), np.array([v, v]), 0.1, small_config)
    assert res.ok and res.report["interp_residual"] == 0
    assert np.all(res.h(polar_grid(5, 8)) == v)
    with pytest.raises(EngineError, match="eps must be positive"):
        convex_hull_extension(node_set([0.0]), np.array([1.0]), 0.0)
