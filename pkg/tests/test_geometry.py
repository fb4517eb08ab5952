"""Charts, weight regions, scaling, and the covering constructions."""

from __future__ import annotations

import math

import numpy as np
import pytest

from uclab.errors import InvalidParams, OutOfChart
from uclab.geometry import (
    Ball,
    DomainSpec,
    InterfaceGraph,
    Rect,
    ThreeRegionParams,
    ball_chain,
    bounding_radius_U3,
    chart_at,
    cube_cover,
    eval_z,
    feasible_theta,
    flatten,
    lemma_audit,
    random_admissible_setup,
    region_integral,
    safe_ball_radius_U2,
    sample_region,
    u1_clearance,
    unflatten,
    vitali_audit,
    vitali_cover,
)
from uclab.manufactured import Polynomial2D


# ---------------------------------------------------------------------------
# weight and regions


def test_eval_z_closed_form():
    # z = alpha_minus*y/delta + beta*y^2/(2 delta^2) - x^2/(2 delta)
    p = ThreeRegionParams(R1=0.4, R2=0.1, alpha_minus=1.0, beta=2.0, delta=0.5)
    assert eval_z(p, (0.0, 0.0)) == 0.0
    assert eval_z(p, (0.0, 0.5)) == pytest.approx(2.0, abs=1e-15)
    assert eval_z(p, (1.0, 0.0)) == pytest.approx(-1.0, abs=1e-15)


def test_exponent_identities_exact():
    p = ThreeRegionParams(R1=0.37, R2=0.11)
    assert p.xi + p.xi_complement == 1.0
    assert ThreeRegionParams(R1=0.3, R2=0.3).xi == 0.2
    assert ThreeRegionParams(R1=0.123, R2=0.123).xi == 0.2


def test_params_validation():
    with pytest.raises(InvalidParams):
        ThreeRegionParams(R1=-0.1, R2=0.1)
    with pytest.raises(InvalidParams):
        ThreeRegionParams(R1=0.4, R2=0.1, theta=0.0)
    with pytest.raises(InvalidParams):
        ThreeRegionParams(R1=0.4, R2=0.1, delta=2.0, delta0=1.0)
    with pytest.raises(InvalidParams):
        ThreeRegionParams(R1=0.4, R2=0.1, R_cap=0.2)


def test_derived_radii_flat_chart():
    p = ThreeRegionParams(R1=0.4, R2=0.1, alpha_plus=1.0, alpha_minus=1.0, beta=1.0, delta=0.5)
    chart = chart_at(InterfaceGraph.flat(0.5), 0.5, 0.3, 1.0)
    assert safe_ball_radius_U2(p, chart) == pytest.approx(1.0 / 60.0, rel=1e-12)
    # clearance theta*R1/(16 a) with a = alpha_plus/delta = 2
    assert u1_clearance(p, chart) == pytest.approx(0.0125, rel=1e-12)
    assert bounding_radius_U3(p, chart) > 0.0


def test_chart_flatten_round_trip():
    graph = InterfaceGraph.parabola(0.5, 0.4, 0.5)
    chart = chart_at(graph, 0.35, 0.25, 1.5)
    rng = np.random.default_rng(2)
    q = np.column_stack([rng.uniform(-0.1, 0.1, 50), rng.uniform(-0.01, 0.01, 50)])
    p = unflatten(chart, q)
    back = flatten(chart, p)
    assert np.max(np.abs(back - q)) < 1e-9
    # flattened interface points sit on the horizontal axis
    on_curve = unflatten(chart, np.column_stack([q[:, 0], np.zeros(50)]))
    flat_y = flatten(chart, on_curve)[:, 1]
    assert np.max(np.abs(flat_y)) < 1e-12


def test_chart_rejects_points_outside_cylinder():
    chart = chart_at(InterfaceGraph.flat(0.5), 0.5, 0.1, 1.0)
    with pytest.raises(OutOfChart):
        flatten(chart, np.array([[0.95, 0.5]]))


def test_lemma_audit_zero_violations_random_setups(rng):
    for i in range(6):
        params, chart = random_admissible_setup(rng, curved=bool(i % 2))
        audit = lemma_audit(params, chart, n_samples=20000, rng=rng)
        assert audit["violations"] == 0
        assert audit["u1_min_distance"] >= 0.0


def test_sample_region_theta_covariance():
    # scaling the region scales the samples, draw for draw
    p1 = ThreeRegionParams(R1=0.4, R2=0.1, theta=1.0)
    ph = ThreeRegionParams(R1=0.4, R2=0.1, theta=0.5)
    for kind in ("U1", "U2", "U3"):
        a = sample_region(kind, p1, 300, np.random.default_rng(7))
        b = sample_region(kind, ph, 300, np.random.default_rng(7))
        assert a.shape == (300, 2)
        assert np.allclose(b, 0.5 * a, rtol=0, atol=1e-15)


def test_sample_region_respects_bounding_structures():
    p = ThreeRegionParams(R1=0.4, R2=0.1)
    chart = chart_at(InterfaceGraph.flat(0.5), 0.5, 0.3, 1.0)
    s3 = sample_region("U3", p, 2000, np.random.default_rng(8))
    assert np.max(np.linalg.norm(s3, axis=1)) <= bounding_radius_U3(p, chart)
    s1 = sample_region("U1", p, 2000, np.random.default_rng(9))
    # the first region sits strictly above the interface at its clearance
    assert np.min(s1[:, 1]) >= u1_clearance(p, chart)


def test_feasible_theta_shrinks_when_needed():
    p = ThreeRegionParams(R1=0.4, R2=0.1)
    chart = chart_at(InterfaceGraph.parabola(0.5, 0.4, 0.5), 0.5, 0.3, 1.5)
    theta, shrunk = feasible_theta(p, chart, h=0.01)
    assert 0.0 < theta <= 1.0
    if shrunk:
        assert theta < 1.0


# ---------------------------------------------------------------------------
# scaling identity


def test_scaling_identity_polynomial(rng):
    # integral of u^2 over the theta-scaled region equals theta^(n+4) times
    # the integral of the pulled-back field over the unit-scale region (n = 2)
    p = ThreeRegionParams(R1=0.4, R2=0.1)
    for trial in range(4):
        u = Polynomial2D.random(rng, degree=3)
        for theta in (0.25, 0.5, 1.0):
            for kind in ("U1", "U2", "U3"):
                lhs = region_integral(kind, p, lambda pts: u.value(pts) ** 2, theta=theta)
                ut = u.scaled_pullback(theta)
                rhs = theta**6 * region_integral(kind, p, lambda pts: ut.value(pts) ** 2)
                assert lhs == pytest.approx(rhs, rel=1e-9)


def test_scaled_pullback_composes():
    u = Polynomial2D.random(np.random.default_rng(9), degree=2)
    v = u.scaled_pullback(0.5).scaled_pullback(0.5)
    w = u.scaled_pullback(0.25)
    assert np.allclose(v.coeffs, w.coeffs, rtol=1e-13)


# ---------------------------------------------------------------------------
# coverings


def test_vitali_cover_invariants(flat_spec):
    cover = vitali_cover(flat_spec, 1.0, 0.05)
    audit = vitali_audit(flat_spec, cover)
    assert audit["disjoint"]
    assert audit["coverage_misses"] == 0
    assert audit["min_center_gap"] >= 2.0 * cover.nu * cover.h * (1.0 - 1e-12)
    assert audit["count_constant"] <= 4.0


def test_vitali_cover_curved(curved_spec):
    cover = vitali_cover(curved_spec, 1.0, 0.05)
    audit = vitali_audit(curved_spec, cover)
    assert audit["disjoint"]
    assert audit["coverage_misses"] == 0


def test_ball_chain_flat_count_oracle(flat_spec):
    x0, y = np.array([0.1, 0.5]), np.array([0.9, 0.5])
    # straight segment of length 0.8 stepped at 2*r1
    for r1, n_expect in ((0.1, 5), (0.05, 9), (1.0 / 60.0, 25)):
        chain = ball_chain(flat_spec, x0, y, r1)
        assert chain.centers.shape[0] == n_expect
        gaps = np.linalg.norm(np.diff(chain.centers, axis=0), axis=1)
        assert np.all(gaps <= 2.0 * r1 * (1.0 + 1e-12))
        assert chain.step_deviation <= 1e-12
        assert np.allclose(chain.centers[0], x0)
        assert np.allclose(chain.centers[-1], y)


def test_ball_chain_nesting_and_count_bound(flat_spec):
    chain = ball_chain(flat_spec, np.array([0.15, 0.2]), np.array([0.8, 0.85]), 0.07)
    gaps = np.linalg.norm(np.diff(chain.centers, axis=0), axis=1)
    # consecutive centers at most 2*r1 apart, so each r1 ball nests in the
    # 3*r1 ball of its predecessor
    assert np.all(gaps <= 2.0 * 0.07 + 1e-12)
    assert chain.centers.shape[0] <= chain.count_bound(flat_spec.omega.area)


def test_ball_chain_endpoints_inside_enlargement(flat_spec):
    with pytest.raises(InvalidParams):
        ball_chain(flat_spec, np.array([0.1, 0.5]), np.array([5.0, 0.5]), 0.05)


def test_cube_cover_counts_and_coverage(flat_spec):
    cubes = cube_cover(flat_spec, 0.05 / 3.0)
    assert cubes.j <= cubes.count_bound
    assert cubes.side == pytest.approx(2.0 * cubes.r1 / math.sqrt(2.0), rel=1e-15)
    # every point of D falls in the grid square of some retained center
    rng = np.random.default_rng(3)
    D = flat_spec.D
    pts = np.column_stack(
        [rng.uniform(D.x0, D.x1, 4000), rng.uniform(D.y0, D.y1, 4000)]
    )
    from scipy.spatial import cKDTree

    tree = cKDTree(cubes.centers)
    d, _ = tree.query(pts, p=np.inf)
    assert np.max(d) <= 0.5 * cubes.side * (1.0 + 1e-12)


def test_cube_cover_bad_radius(flat_spec):
    with pytest.raises(InvalidParams):
        cube_cover(flat_spec, 0.0)


# ---------------------------------------------------------------------------
# domain plumbing used everywhere else


def test_domain_side_and_erosion(flat_spec):
    pts = np.array([[0.5, 0.9], [0.5, 0.1]])
    assert list(flat_spec.side(pts)) == [1, -1]
    inner = flat_spec.omega.eroded(0.1)
    assert (inner.x0, inner.x1, inner.y0, inner.y1) == (0.1, 0.9, 0.1, 0.9)


def test_ball_and_rect_validation():
    with pytest.raises(InvalidParams):
        Ball(np.array([0.0, 0.0]), -1.0)
    with pytest.raises(InvalidParams):
        Rect(0.5, 0.5, 0.0, 1.0)
