"""Interface-fitted meshes: fit, quality, and file round-trip."""

from __future__ import annotations

import numpy as np
import pytest

from uclab.errors import MeshFailure
from uclab.meshing import build_fitted_mesh, build_mesh, read_mesh, write_mesh


def test_no_triangle_straddles_interface(flat_spec, flat_mesh):
    side = flat_spec.side(flat_mesh.nodes[flat_mesh.tris].mean(axis=1))
    # every triangle's label matches the side of its centroid
    assert np.array_equal(side, flat_mesh.side)
    # and no triangle has vertices strictly on both sides
    y = flat_mesh.nodes[flat_mesh.tris][:, :, 1]
    assert not np.any((y.min(axis=1) < 0.5 - 1e-12) & (y.max(axis=1) > 0.5 + 1e-12))


def test_interface_nodes_on_curve(curved_spec, curved_mesh):
    poly = curved_mesh.interface_polyline()
    want = curved_spec.interface.psi(poly[:, 0])
    assert np.max(np.abs(poly[:, 1] - want)) == 0.0
    # between nodes the polyline sags at most kappa*dx^2/8 below the curve
    mid_x = 0.5 * (poly[:-1, 0] + poly[1:, 0])
    mid_y = 0.5 * (poly[:-1, 1] + poly[1:, 1])
    assert np.max(np.abs(mid_y - curved_spec.interface.psi(mid_x))) < 1e-3


def test_mesh_quality_and_size(flat_mesh, curved_mesh):
    for mesh in (flat_mesh, curved_mesh):
        assert mesh.min_angle_deg() >= 20.0
        assert mesh.h_max() <= 0.05 * (1.0 + 1e-9) * np.sqrt(2.0)
        assert mesh.n_tris == mesh.tris.shape[0]
        areas = mesh.tri_areas()
        assert np.all(areas > 0.0)
        # triangulation covers the unit square exactly
        assert np.sum(areas) == pytest.approx(1.0, rel=1e-12)


def test_unreachable_quality_raises(flat_spec):
    with pytest.raises(MeshFailure):
        build_fitted_mesh(flat_spec, 0.05, min_angle_deg=58.0)


def test_build_mesh_alias(flat_spec, flat_mesh):
    other = build_mesh(flat_spec, 0.05)
    assert np.array_equal(other.nodes, flat_mesh.nodes)
    assert np.array_equal(other.tris, flat_mesh.tris)


def test_mesh_file_round_trip(tmp_path, flat_mesh):
    path = tmp_path / "mesh.csv"
    write_mesh(path, flat_mesh)
    nodes, tris, side = read_mesh(path)
    assert np.array_equal(nodes, flat_mesh.nodes)
    assert np.array_equal(tris, flat_mesh.tris)
    assert np.array_equal(side, flat_mesh.side)


def test_locate_finds_containing_triangle(flat_mesh, rng):
    pts = np.column_stack([rng.uniform(0.01, 0.99, 200), rng.uniform(0.01, 0.99, 200)])
    ti, bary = flat_mesh.locate(pts)
    assert np.all(ti >= 0)
    verts = flat_mesh.nodes[flat_mesh.tris[ti]]
    back = np.einsum("pk,pkd->pd", bary, verts)
    assert np.max(np.abs(back - pts)) < 1e-12
    outside = flat_mesh.locate(np.array([[1.5, 0.5]]))[0]
    assert outside[0] == -1
