"""Norm machinery, envelope fits, and the inequality checks."""

from __future__ import annotations

import math

import numpy as np
import pytest

from uclab.errors import (
    BallOutsideDomain,
    DegenerateSamples,
    GeometryInfeasible,
    RadiiOrder,
)
from uclab.estimator import (
    TheoryConstants,
    ball_l2_norm,
    classify_regime,
    compute_slack,
    envelope_slacks,
    fit_exponent,
    lift_inhomogeneous,
    propagation_check,
    region_l2_norm,
    three_ball_check,
    three_region_check,
)
from uclab.experiments import homogeneous_family
from uclab.fem import Coefficients, l2_norm
from uclab.geometry import Ball, Rect, ThreeRegionParams, chart_at
from uclab.manufactured import exact_flat_solution, linear_interface_solution


# ---------------------------------------------------------------------------
# envelope fit


def _synthetic_samples(rng, C=2.0, delta=0.3, n=30, slack=0.0):
    out = []
    for _ in range(n):
        N1, N3 = rng.uniform(0.01, 1.0), rng.uniform(0.5, 2.0)
        N2 = C * N1**delta * N3 ** (1.0 - delta) * math.exp(-slack * rng.uniform(0.0, 1.0))
        out.append((N1, N2, N3, 0.0))
    return out


def test_fit_exponent_round_trip(rng):
    C_hat, d_hat = fit_exponent(_synthetic_samples(rng))
    assert C_hat == pytest.approx(2.0, abs=1e-6)
    assert d_hat == pytest.approx(0.3, abs=1e-6)


def test_fit_envelope_slack_nonnegative_bitwise(rng):
    # on loose data the envelope touches its support samples and never dips
    for trial in range(10):
        samples = _synthetic_samples(rng, slack=1.5, n=40)
        C_hat, d_hat = fit_exponent(samples)
        slacks = envelope_slacks(samples, C_hat, d_hat)
        assert np.all(slacks >= 0.0)
        assert np.min(slacks) < 1e-9  # it touches


def test_fit_exponent_degenerate_inputs():
    same = [(0.5, 1.0, 1.0, 0.0)] * 5
    with pytest.raises(DegenerateSamples):
        fit_exponent(same)


def test_compute_slack_sign():
    assert compute_slack(0.25, 0.9, 1.0, 0.0, 2.0, 0.5) > 0.0
    assert compute_slack(0.25, 1.1, 1.0, 0.0, 1.0, 0.5) < 0.0


# ---------------------------------------------------------------------------
# region norms


def test_ball_norm_fast_path_matches_dense(flat_spec, flat_mesh, coeffs21):
    fld = exact_flat_solution(2.0, 1.0, 2.0, level=0.5)
    u = fld.bind(flat_spec).value(flat_mesh.nodes)
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(40):
        c = rng.uniform(0.2, 0.8, 2)
        r = rng.uniform(0.0005, 0.004)
        fast = ball_l2_norm((flat_mesh, u), c, r)
        import uclab.fem as fem

        dense = fem.region_l2_norm(flat_mesh, u, Ball(c, r), depth=10)
        worst = max(worst, abs(fast - dense) / dense)
    assert worst < 5e-3


def test_ball_norm_closed_form_inside_one_triangle(flat_mesh):
    # plane field over a disc strictly inside a triangle: the polar integral
    # is pi r^2 a^2 + pi r^4 |g|^2 / 4
    g = np.array([0.7, -0.4])
    u = flat_mesh.nodes @ g + 0.3
    tri = flat_mesh.nodes[flat_mesh.tris[500]]
    c = tri.mean(axis=0)
    r = 1e-4
    a = c @ g + 0.3
    want = math.sqrt(math.pi * r**2 * a**2 + 0.25 * math.pi * r**4 * (g @ g))
    got = ball_l2_norm((flat_mesh, u), c, r)
    assert got == pytest.approx(want, rel=1e-12)


def test_region_norm_missing_region_warns(flat_mesh):
    u = np.ones(flat_mesh.n_nodes)
    with pytest.warns(UserWarning):
        v = region_l2_norm((flat_mesh, u), Rect(2.0, 3.0, 2.0, 3.0))
    assert v == 0.0


def test_lift_disc_oracle(flat_spec, coeffs21):
    # unit source on a disc, reference profile (R^2-|x|^2)/4: the norm tends
    # to R^3 sqrt(pi/48) as the inscribed polygon fills the disc
    from uclab.meshing import build_fitted_mesh

    R = 0.15
    want = R**3 * math.sqrt(math.pi / 48.0)
    co = Coefficients(a_plus=1.0, a_minus=1.0)
    rel = []
    for h in (0.02, 0.01):
        mesh = build_fitted_mesh(flat_spec, h)
        u0, info = lift_inhomogeneous(
            mesh, co, lambda pts: np.ones(pts.shape[0]), None, Ball(np.array([0.5, 0.75]), R)
        )
        rel.append(abs(l2_norm(mesh, u0) - want) / want)
        assert info["n_free_nodes"] > 0
    assert rel[0] < 0.25
    assert rel[1] < 0.6 * rel[0]


# ---------------------------------------------------------------------------
# inequality checks


def test_classify_regime():
    assert classify_regime((0.3, 0.899, 0.9), 0.05) == "close"
    assert classify_regime((0.3, 0.4, 0.42), 0.05) == "mid"
    assert classify_regime((0.3, 0.5, 0.9), 0.001) == "far"


def test_three_ball_radii_validation(flat_spec, flat_mesh):
    u = np.ones(flat_mesh.n_nodes)
    const = TheoryConstants()
    with pytest.raises(RadiiOrder):
        three_ball_check((flat_mesh, u), flat_spec, (0.5, 0.5), (0.2, 0.1, 0.3), 0.0, const)
    with pytest.raises(BallOutsideDomain):
        three_ball_check((flat_mesh, u), flat_spec, (0.5, 0.9), (0.1, 0.2, 0.3), 0.0, const)


def test_three_ball_holds_on_family(flat_spec, flat_mesh, coeffs21, rng):
    oracles = [exact_flat_solution(2.0, 1.0, k, level=0.5) for k in (1.0, 2.0)]
    fam = homogeneous_family(flat_mesh, coeffs21, flat_spec, rng, n_random=6, oracle_fields=oracles)
    for tag, u in fam:
        rep = three_ball_check(
            (flat_mesh, u), flat_spec, (0.5, 0.5), (0.1, 0.2, 0.3), 1e-8, TheoryConstants()
        )
        assert rep.slack >= 0.0
        assert 0.0 < rep.fitted_delta < 1.0
        assert rep.regime in ("close", "mid", "far")


def test_three_region_exponent_structure(flat_spec, flat_mesh, coeffs21, rng):
    params = ThreeRegionParams(R1=0.2, R2=0.05, delta=0.5)
    chart = chart_at(flat_spec.interface, 0.5, 0.3, 1.0)
    fam = homogeneous_family(flat_mesh, coeffs21, flat_spec, rng, n_random=4)
    for tag, u in fam:
        rep = three_region_check((flat_mesh, u), params, chart, 1e-8)
        assert rep.slack >= 0.0
        assert rep.fitted_delta == params.xi
        assert rep.fitted_delta + params.xi_complement == 1.0


def test_propagation_check_guards(flat_spec, flat_mesh, coeffs21):
    u = np.ones(flat_mesh.n_nodes)
    fields = [(flat_mesh, u)] * 3
    with pytest.raises(GeometryInfeasible):
        propagation_check(fields, flat_spec, (0.5, 0.55), 0.2, 0.2, 1e-8)
    with pytest.raises(DegenerateSamples):
        propagation_check([(flat_mesh, u)], flat_spec, (0.5, 0.55), 0.2, 0.025, 1e-8)


def test_propagation_check_certificate(flat_spec, flat_mesh, coeffs21, rng):
    oracles = [exact_flat_solution(2.0, 1.0, k, level=0.5) for k in (1.0, 2.0, 3.0)]
    fam = homogeneous_family(flat_mesh, coeffs21, flat_spec, rng, n_random=5, oracle_fields=oracles)
    fields = [(flat_mesh, u) for _, u in fam]
    reports, bound, details = propagation_check(
        fields, flat_spec, (0.5, 0.55), 0.2, 0.025, 1e-8, rng=rng
    )
    assert details["violations"] == 0
    assert 0.0 < details["delta_hat"] < 1.0
    assert details["certificate"]["envelope_bound_holds"]
    assert details["certificate"]["chain_bound_holds"]
    assert all(c["count_ok"] for c in details["chains"])
    assert details["cube_count"] <= details["cube_count_bound"]
    assert bound.predicted_delta_lower_log < 0.0
    assert bound.predicted_C > 0.0
