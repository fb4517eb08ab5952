"""Assembly, transmission solves, and the manufactured oracles."""

from __future__ import annotations

import numpy as np
import pytest

from uclab.errors import ValidationError
from uclab.fem import (
    Coefficients,
    PiecewiseCoefficients,
    assemble,
    error_norms,
    interface_jumps,
    l2_norm,
    region_l2_norm,
    solve_dirichlet,
    verify_transmission,
)
from uclab.geometry import Ball
from uclab.manufactured import (
    Polynomial2D,
    charge_field,
    even_flat_solution,
    exact_flat_solution,
    linear_interface_solution,
    transmission_mismatch,
)


def test_piecewise_linear_solution_is_exact(flat_spec, flat_mesh, coeffs21):
    # the linear transmission field lies in the P1 space, so the solve
    # reproduces it to solver tolerance
    fld = linear_interface_solution(2.0, 1.0, level=0.5)
    sol = solve_dirichlet(flat_mesh, coeffs21, fld.bind(flat_spec))
    exact = fld.bind(flat_spec).value(flat_mesh.nodes)
    assert np.max(np.abs(sol.u - exact)) < 1e-10
    assert sol.residual < 1e-10


def test_system_symmetric_without_drift(flat_mesh, coeffs21):
    A, _ = assemble(flat_mesh, coeffs21)
    asym = abs(A - A.T).max()
    assert asym < 1e-14


def test_galerkin_residual_at_interior_nodes(flat_spec, flat_mesh, coeffs21):
    fld = exact_flat_solution(2.0, 1.0, 2.0, level=0.5)
    sol = solve_dirichlet(flat_mesh, coeffs21, fld.bind(flat_spec))
    res = sol.A @ sol.u - sol.rhs
    interior = np.ones(flat_mesh.n_nodes, dtype=bool)
    interior[flat_mesh.boundary_nodes] = False
    assert np.max(np.abs(res[interior])) < 1e-10


def test_ellipticity_validation():
    with pytest.raises(ValidationError):
        Coefficients(a_plus=0.0, a_minus=1.0)
    with pytest.raises(ValidationError):
        PiecewiseCoefficients(a_plus=lambda p: 0.0 * p[:, 0] - 1.0, a_minus=1.0)


def test_matrix_coefficients_accepted(flat_spec, flat_mesh):
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    co = Coefficients(a_plus=A, a_minus=np.eye(2))
    fld = linear_interface_solution(A, np.eye(2), level=0.5)
    sol = solve_dirichlet(flat_mesh, co, fld.bind(flat_spec))
    exact = fld.bind(flat_spec).value(flat_mesh.nodes)
    assert np.max(np.abs(sol.u - exact)) < 1e-10


def test_flat_oracle_solves_the_equation(flat_spec):
    # each side is harmonic by construction; audit with finite differences
    fld = exact_flat_solution(2.0, 1.0, 3.0, level=0.5)
    rng = np.random.default_rng(4)
    n = 10000
    pts = np.column_stack([rng.uniform(0.05, 0.95, n), rng.uniform(0.05, 0.95, n)])
    keep = np.abs(pts[:, 1] - 0.5) > 2e-3
    pts = pts[keep]
    side = flat_spec.side(pts)
    d = 1e-4
    for s in (-1, 1):
        p = pts[side == s]
        lap = (
            fld.value(p + [d, 0.0], s)
            + fld.value(p - [d, 0.0], s)
            + fld.value(p + [0.0, d], s)
            + fld.value(p - [0.0, d], s)
            - 4.0 * fld.value(p, s)
        ) / d**2
        assert np.max(np.abs(lap)) < 1e-5
    # trace and conormal flux match across the interface
    gaps = transmission_mismatch(fld, 2.0, 1.0, 0.5, (0.0, 1.0))
    assert gaps["trace_jump_max"] < 1e-12
    assert gaps["flux_jump_max"] < 1e-12


def test_even_oracle_flux_matches_any_pair():
    fld = even_flat_solution(2.0, level=0.5)
    for ap, am in ((2.0, 1.0), (10.0, 1.0), (3.0, 7.0)):
        gaps = transmission_mismatch(fld, ap, am, 0.5, (0.0, 1.0))
        assert gaps["trace_jump_max"] < 1e-12
        assert gaps["flux_jump_max"] < 1e-12


def test_charge_oracle_transmission():
    fld = charge_field(2.0, 1.0, np.array([0.35, 1.6]), level=0.5)
    gaps = transmission_mismatch(fld, 2.0, 1.0, 0.5, (0.0, 1.0))
    assert gaps["trace_jump_max"] < 1e-10
    assert gaps["flux_jump_max"] < 1e-10


def test_fem_transmission_audit(flat_spec, flat_mesh, coeffs21):
    fld = exact_flat_solution(2.0, 1.0, 2.0, level=0.5)
    sol = solve_dirichlet(flat_mesh, coeffs21, fld.bind(flat_spec))
    trace_jump, flux_jump = verify_transmission(sol)
    assert trace_jump == 0.0
    assert flux_jump < 0.2
    jumps = interface_jumps(sol)
    assert jumps["trace_jump_max"] == 0.0
    # negative control: a field with the wrong coefficient pair shows a
    # conormal mismatch well above the discretization level
    _, bad_flux = verify_transmission(sol, Coefficients(a_plus=10.0, a_minus=1.0))
    assert bad_flux > 5.0 * flux_jump


def test_error_norms_zero_for_exact_nodal_field(flat_spec, flat_mesh):
    fld = linear_interface_solution(2.0, 1.0, level=0.5)
    u = fld.bind(flat_spec).value(flat_mesh.nodes)
    en = error_norms(flat_mesh, u, fld.value, fld.grad)
    assert en["l2"] < 1e-13
    assert en["h1_semi"] < 1e-12


def test_region_l2_norm_constant_field(flat_mesh):
    u = np.ones(flat_mesh.n_nodes)
    ball = Ball(np.array([0.5, 0.75]), 0.1)
    got = region_l2_norm(flat_mesh, u, ball, depth=8)
    assert got == pytest.approx(np.sqrt(np.pi) * 0.1, rel=1e-4)
    assert l2_norm(flat_mesh, u) == pytest.approx(1.0, rel=1e-12)


def test_polynomial_value_matches_horner(rng):
    p = Polynomial2D.random(rng, degree=3)
    pts = rng.uniform(-1.0, 1.0, (50, 2))
    direct = np.zeros(50)
    for i in range(p.coeffs.shape[0]):
        for j in range(p.coeffs.shape[1]):
            direct += p.coeffs[i, j] * pts[:, 0] ** i * pts[:, 1] ** j
    assert np.allclose(p.value(pts), direct, rtol=1e-12)
