"""Interface-fitted triangulations of rectangular two-phase domains.

The mesh is a structured grid of columns: every column carries one node
exactly on the interface graph, the same number of cells below it, and the
same number above, so the grid stays conforming while the interface row
tracks the curve. Each quad is split along its shorter diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, MeshFailure
from .geometry import DomainSpec

__all__ = ["TriMesh", "build_fitted_mesh", "build_mesh", "write_mesh", "read_mesh"]


@dataclass(frozen=True)
class TriMesh:
    """Triangulation with per-triangle phase labels.

    ``side`` is +1 for triangles above the interface row and -1 below.
    ``xs`` are the column abscissae and ``Y[i, j]`` the node heights, so node
    ids are i * n_rows + j. The interface is the node row j = m_minus.
    """

    nodes: np.ndarray
    tris: np.ndarray
    side: np.ndarray
    xs: np.ndarray
    Y: np.ndarray
    m_minus: int
    m_plus: int
    diag: np.ndarray  # True where the cell splits along (i,j)-(i+1,j+1)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_tris(self) -> int:
        return int(self.tris.shape[0])

    @property
    def n_rows(self) -> int:
        return self.m_minus + self.m_plus + 1

    @property
    def n_cols(self) -> int:
        return int(self.xs.shape[0])

    def node_id(self, i, j):
        return np.asarray(i) * self.n_rows + np.asarray(j)

    @property
    def interface_nodes(self) -> np.ndarray:
        return self.node_id(np.arange(self.n_cols), self.m_minus)

    @property
    def boundary_loop(self) -> np.ndarray:
        """Boundary node ids in counterclockwise order, starting bottom-left."""
        nc, nr = self.n_cols, self.n_rows
        bottom = self.node_id(np.arange(nc), 0)
        right = self.node_id(nc - 1, np.arange(1, nr))
        top = self.node_id(np.arange(nc - 2, -1, -1), nr - 1)
        left = self.node_id(0, np.arange(nr - 2, 0, -1))
        return np.concatenate([bottom, right, top, left])

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_loop)

    def tri_vertices(self) -> np.ndarray:
        return self.nodes[self.tris]

    def tri_areas(self) -> np.ndarray:
        v = self.tri_vertices()
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def h_max(self) -> float:
        v = self.tri_vertices()
        e = np.stack(
            [v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1
        )
        return float(np.max(np.linalg.norm(e, axis=2)))

    def min_angle_deg(self) -> float:
        v = self.tri_vertices()
        ang = []
        for k in range(3):
            a, b, c = v[:, k], v[:, (k + 1) % 3], v[:, (k + 2) % 3]
            u, w = b - a, c - a
            cosv = np.einsum("ij,ij->i", u, w) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1)
            )
            ang.append(np.arccos(np.clip(cosv, -1.0, 1.0)))
        return float(np.degrees(np.min(ang)))

    def interface_polyline(self) -> np.ndarray:
        return self.nodes[self.interface_nodes]

    def locate(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Return (triangle index, barycentric coordinates) per query point.

        Points outside the meshed rectangle get index -1.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        tri_idx = np.full(n, -1, dtype=np.int64)
        bary = np.zeros((n, 3))
        eps = 1e-12
        ci = np.searchsorted(self.xs, pts[:, 0], side="right") - 1
        ci = np.clip(ci, 0, self.n_cols - 2)
        inx = (pts[:, 0] >= self.xs[0] - eps) & (pts[:, 0] <= self.xs[-1] + eps)
        # row from the left column's node heights
        Yl = self.Y[ci]
        rj = np.sum(Yl <= pts[:, 1][:, None], axis=1) - 1
        rj = np.clip(rj, 0, self.n_rows - 2)
        iny = (pts[:, 1] >= np.minimum(self.Y[ci, 0], self.Y[ci + 1, 0]) - eps) & (
            pts[:, 1] <= np.maximum(self.Y[ci, -1], self.Y[ci + 1, -1]) + eps
        )
        ok = inx & iny
        cell = ci * (self.n_rows - 1) + rj
        for attempt in (0, 1):
            t0 = 2 * cell + attempt
            v = self.nodes[self.tris[t0]]
            d = pts - v[:, 0]
            T = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
            det = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
            l1 = (d[:, 0] * T[:, 1, 1] - d[:, 1] * T[:, 0, 1]) / det
            l2 = (-d[:, 0] * T[:, 1, 0] + d[:, 1] * T[:, 0, 0]) / det
            l0 = 1.0 - l1 - l2
            hit = ok & (l0 >= -1e-9) & (l1 >= -1e-9) & (l2 >= -1e-9) & (tri_idx < 0)
            tri_idx[hit] = t0[hit]
            bary[hit] = np.stack([l0, l1, l2], axis=1)[hit]
        # sheared cells can push a point into a neighboring column; sweep locally
        missing = np.nonzero(ok & (tri_idx < 0))[0]
        for p in missing:
            found = False
            for dc in (-1, 0, 1):
                c = int(np.clip(ci[p] + dc, 0, self.n_cols - 2))
                for r in range(max(rj[p] - 2, 0), min(rj[p] + 3, self.n_rows - 1)):
                    for attempt in (0, 1):
                        t0 = 2 * (c * (self.n_rows - 1) + r) + attempt
                        v = self.nodes[self.tris[t0]]
                        T = np.stack([v[1] - v[0], v[2] - v[0]], axis=1)
                        try:
                            l12 = np.linalg.solve(T, pts[p] - v[0])
                        except np.linalg.LinAlgError:
                            continue
                        l = np.array([1.0 - l12.sum(), l12[0], l12[1]])
                        if np.all(l >= -1e-9):
                            tri_idx[p] = t0
                            bary[p] = l
                            found = True
                            break
                    if found:
                        break
                if found:
                    break
        np.clip(bary, 0.0, 1.0, out=bary)
        s = bary.sum(axis=1)
        good = s > 0
        bary[good] /= s[good][:, None]
        return tri_idx, bary


def build_fitted_mesh(spec: DomainSpec, h: float, min_angle_deg: float = 20.0) -> TriMesh:
    """Build the fitted mesh with element diameters at most ``h``."""
    if h <= 0:
        raise InvalidParams("mesh size h must be positive")
    om = spec.omega
    target = h / math.sqrt(2.0)
    nx = max(int(math.ceil(om.width / target)), 2)
    xs = np.linspace(om.x0, om.x1, nx + 1)
    psi = np.asarray(spec.interface.psi(xs), dtype=float)
    depth_lo = psi - om.y0
    depth_hi = om.y1 - psi
    if np.any(depth_lo <= 0) or np.any(depth_hi <= 0):
        raise MeshFailure("interface touches the top or bottom edge at a mesh column")
    m_minus = max(int(math.ceil(np.max(depth_lo) / target)), 1)
    m_plus = max(int(math.ceil(np.max(depth_hi) / target)), 1)
    jlo = np.arange(m_minus + 1) / m_minus
    jhi = np.arange(1, m_plus + 1) / m_plus
    Y = np.concatenate(
        [
            om.y0 + jlo[None, :] * depth_lo[:, None],
            psi[:, None] + jhi[None, :] * depth_hi[:, None],
        ],
        axis=1,
    )
    n_rows = m_minus + m_plus + 1
    X = np.broadcast_to(xs[:, None], Y.shape)
    nodes = np.stack([X.ravel(), Y.ravel()], axis=-1)

    ii, jj = np.meshgrid(np.arange(nx), np.arange(n_rows - 1), indexing="ij")
    n00 = (ii * n_rows + jj).ravel()
    n10 = ((ii + 1) * n_rows + jj).ravel()
    n01 = (ii * n_rows + jj + 1).ravel()
    n11 = ((ii + 1) * n_rows + jj + 1).ravel()
    d_main = np.linalg.norm(nodes[n11] - nodes[n00], axis=1)
    d_anti = np.linalg.norm(nodes[n01] - nodes[n10], axis=1)
    diag = d_main <= d_anti

    tris = np.empty((2 * n00.size, 3), dtype=np.int64)
    # main diagonal split: (00,10,11) and (00,11,01); anti: (00,10,01), (10,11,01)
    tris[0::2] = np.where(diag[:, None], np.stack([n00, n10, n11], 1), np.stack([n00, n10, n01], 1))
    tris[1::2] = np.where(diag[:, None], np.stack([n00, n11, n01], 1), np.stack([n10, n11, n01], 1))
    below = (jj.ravel() < m_minus)
    side = np.where(np.repeat(below, 2), -1, 1).astype(np.int8)

    mesh = TriMesh(
        nodes=nodes,
        tris=tris,
        side=side,
        xs=xs,
        Y=Y,
        m_minus=m_minus,
        m_plus=m_plus,
        diag=diag.reshape(nx, n_rows - 1),
    )
    if mesh.h_max() > h * (1.0 + 1e-9):
        raise MeshFailure(
            f"element diameter {mesh.h_max():.6g} exceeds requested h = {h:.6g}"
        )
    ang = mesh.min_angle_deg()
    if ang < min_angle_deg:
        raise MeshFailure(
            f"mesh quality too low: min angle {ang:.3f} deg < {min_angle_deg} deg; "
            "reduce h or flatten the interface"
        )
    return mesh


build_mesh = build_fitted_mesh


def write_mesh(path: str, mesh: TriMesh) -> None:
    """Plain text mesh: $nodes block then $triangles block with phase labels."""
    with open(path, "w") as fh:
        fh.write("$nodes\n")
        fh.write(f"{mesh.n_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i} {x:.17g} {y:.17g}\n")
        fh.write("$triangles\n")
        fh.write(f"{mesh.n_tris}\n")
        for t, (a, b, c) in enumerate(mesh.tris):
            fh.write(f"{t} {a} {b} {c} {int(mesh.side[t])}\n")


def read_mesh(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read the plain text format back as (nodes, tris, side)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines[0] != "$nodes":
        raise InvalidParams(f"mesh file must start with $nodes, got {lines[0]!r}")
    n = int(lines[1])
    nodes = np.empty((n, 2))
    for ln in lines[2 : 2 + n]:
        parts = ln.split()
        nodes[int(parts[0])] = [float(parts[1]), float(parts[2])]
    off = 2 + n
    if lines[off] != "$triangles":
        raise InvalidParams("mesh file missing $triangles block")
    m = int(lines[off + 1])
    tris = np.empty((m, 3), dtype=np.int64)
    side = np.empty(m, dtype=np.int8)
    for ln in lines[off + 2 : off + 2 + m]:
        parts = ln.split()
        t = int(parts[0])
        tris[t] = [int(parts[1]), int(parts[2]), int(parts[3])]
        side[t] = int(parts[4])
    return nodes, tris, side
