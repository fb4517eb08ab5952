"""P1 finite elements on interface-fitted meshes.

The bilinear form is

    a(u, v) = int a grad(u) . grad(v) - int (b . grad(u)) v - int q u v

so the assembled system is the negative of the divergence-form operator;
with b = q = 0 it is symmetric positive definite. Residuals at constrained
rows recover the consistent conormal flux on the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, EmptyRegion, InvalidParams, SolveFailure, ValidationError
from .geometry import Ball, Rect
from .meshing import TriMesh

__all__ = [
    "Coefficients",
    "PiecewiseCoefficients",
    "assemble",
    "FemSolution",
    "solve_dirichlet",
    "l2_norm",
    "h1_seminorm",
    "error_norms",
    "interface_jumps",
    "verify_transmission",
    "region_mass_matrix",
    "region_l2_norm",
]

_MASS0 = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = float(m) * np.eye(2)
    if m.shape != (2, 2):
        raise InvalidParams(f"diffusion coefficient must be scalar or 2x2, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=1e-12):
        raise InvalidParams("diffusion matrix must be symmetric")
    ev = np.linalg.eigvalsh(m)
    if ev[0] <= 0:
        raise InvalidParams(f"diffusion matrix must be positive definite, eigenvalues {ev}")
    return m


@dataclass(frozen=True)
class Coefficients:
    """Piecewise coefficients: 2x2 SPD diffusion per side, drift b, potential q."""

    a_plus: np.ndarray
    a_minus: np.ndarray
    b: Callable[[np.ndarray], np.ndarray] | None = None
    q: Callable[[np.ndarray], np.ndarray] | float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a_plus", _as_matrix(self.a_plus))
        object.__setattr__(self, "a_minus", _as_matrix(self.a_minus))

    def a_for_side(self, side: int) -> np.ndarray:
        return self.a_plus if side > 0 else self.a_minus

    @property
    def ellipticity(self) -> float:
        """Largest lambda with lambda |xi|^2 <= xi.a.xi <= |xi|^2 / lambda on both sides."""
        lam = math.inf
        for m in (self.a_plus, self.a_minus):
            ev = np.linalg.eigvalsh(m)
            lam = min(lam, ev[0], 1.0 / ev[1])
        return lam

    def q_at(self, pts: np.ndarray) -> np.ndarray:
        if callable(self.q):
            return np.asarray(self.q(pts), dtype=float)
        return np.full(pts.shape[0], float(self.q))

    def b_at(self, pts: np.ndarray) -> np.ndarray | None:
        if self.b is None:
            return None
        vals = np.asarray(self.b(pts), dtype=float)
        if vals.shape != (pts.shape[0], 2):
            raise DimensionMismatch(f"drift must return (N, 2), got {vals.shape}")
        return vals

    def a_at(self, pts: np.ndarray, side: int) -> np.ndarray:
        """Diffusion matrices at ``pts`` for the requested side, shape (N, 2, 2)."""
        return np.broadcast_to(self.a_for_side(side), (pts.shape[0], 2, 2))

    def a_field(self, mesh: TriMesh) -> np.ndarray:
        """Per-element diffusion matrices, one-sided by the element tag."""
        out = np.empty((mesh.n_tris, 2, 2))
        out[mesh.side > 0] = self.a_plus
        out[mesh.side < 0] = self.a_minus
        return out


def _matrix_field_fn(a, name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Normalize a diffusion-coefficient spec to pts -> (N, 2, 2)."""
    if not callable(a):
        const = _as_matrix(a)
        return lambda pts: np.broadcast_to(const, (pts.shape[0], 2, 2))

    def evaluate(pts: np.ndarray) -> np.ndarray:
        vals = np.asarray(a(pts), dtype=float)
        if vals.shape == (pts.shape[0],):
            out = np.zeros((pts.shape[0], 2, 2))
            out[:, 0, 0] = vals
            out[:, 1, 1] = vals
            return out
        if vals.shape == (pts.shape[0], 2, 2):
            return vals
        raise DimensionMismatch(
            f"{name} must return (N,) or (N, 2, 2) for (N, 2) points, got {vals.shape}"
        )

    return evaluate


def _sym_eig_range(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalue range of a batch of symmetric 2x2 matrices, closed form."""
    half_tr = 0.5 * (A[:, 0, 0] + A[:, 1, 1])
    disc = np.sqrt(np.maximum(0.25 * (A[:, 0, 0] - A[:, 1, 1]) ** 2 + A[:, 0, 1] ** 2, 0.0))
    return half_tr - disc, half_tr + disc


@dataclass(frozen=True)
class PiecewiseCoefficients:
    """Position-dependent coefficients with declared bounds, audited by sampling.

    ``a_plus`` / ``a_minus`` may be constants (scalar or 2x2) or callables on
    (N, 2) point arrays returning (N,) isotropic values or (N, 2, 2) matrices.
    The declared bounds are claims the constructor checks on a dense grid over
    ``sample_box``: two-sided ellipticity ``lambda_bound``, Lipschitz quotient
    of each one-sided diffusion field ``M_bound``, sup norms ``K1_bound`` for
    q and ``K2_bound`` for b. A sampled violation raises ValidationError.
    """

    a_plus: Callable[[np.ndarray], np.ndarray] | np.ndarray | float
    a_minus: Callable[[np.ndarray], np.ndarray] | np.ndarray | float
    b: Callable[[np.ndarray], np.ndarray] | None = None
    q: Callable[[np.ndarray], np.ndarray] | float = 0.0
    lambda_bound: float = 0.05
    M_bound: float = 100.0
    K1_bound: float = 100.0
    K2_bound: float = 100.0
    sample_box: Rect = Rect(0.0, 1.0, 0.0, 1.0)
    n_samples: int = 256

    def __post_init__(self):
        for name in ("lambda_bound", "M_bound", "K1_bound", "K2_bound"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParams(f"{name} must be a positive real, got {v}")
        if self.lambda_bound > 1.0:
            raise InvalidParams("two-sided ellipticity needs lambda_bound <= 1")
        object.__setattr__(self, "_a_fns", {
            1: _matrix_field_fn(self.a_plus, "a_plus"),
            -1: _matrix_field_fn(self.a_minus, "a_minus"),
        })
        self._audit()

    def _sample_grid(self) -> np.ndarray:
        g = max(int(math.ceil(math.sqrt(self.n_samples))), 2)
        box = self.sample_box
        xs = np.linspace(box.x0, box.x1, g)
        ys = np.linspace(box.y0, box.y1, g)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X, Y], axis=-1)  # (g, g, 2), kept gridded for quotients

    def _audit(self) -> None:
        grid = self._sample_grid()
        pts = grid.reshape(-1, 2)
        tol = 1e-9
        for side in (1, -1):
            name = "a_plus" if side > 0 else "a_minus"
            A = self.a_at(pts, side)
            if not np.all(np.isfinite(A)):
                raise ValidationError(f"{name} produced non-finite entries in the sample box")
            asym = float(np.max(np.abs(A - np.swapaxes(A, 1, 2))))
            if asym > tol * (1.0 + float(np.max(np.abs(A)))):
                raise ValidationError(f"sampled {name} is not symmetric (max asymmetry {asym:.3e})")
            lo, hi = _sym_eig_range(A)
            lam = self.lambda_bound
            if np.min(lo) < lam * (1 - tol) or np.max(hi) > (1 + tol) / lam:
                raise ValidationError(
                    f"sampled ellipticity violation for {name}: eigenvalues in "
                    f"[{np.min(lo):.6g}, {np.max(hi):.6g}] escape [{lam:.6g}, {1 / lam:.6g}]"
                )
            G = A.reshape(grid.shape[0], grid.shape[1], 4)
            P = grid
            for axis in (0, 1):
                dG = np.max(np.abs(np.diff(G, axis=axis)), axis=-1)
                dP = np.linalg.norm(np.diff(P, axis=axis), axis=-1)
                quot = float(np.max(dG / np.maximum(dP, 1e-300)))
                if quot > self.M_bound * (1 + 1e-6):
                    raise ValidationError(
                        f"sampled Lipschitz quotient {quot:.6g} of {name} exceeds M_bound {self.M_bound:.6g}"
                    )
        qv = self.q_at(pts)
        if not np.all(np.isfinite(qv)):
            raise ValidationError("q produced non-finite values in the sample box")
        if float(np.max(np.abs(qv))) > self.K1_bound * (1 + tol):
            raise ValidationError(
                f"sampled sup |q| = {float(np.max(np.abs(qv))):.6g} exceeds K1_bound {self.K1_bound:.6g}"
            )
        bv = self.b_at(pts)
        if bv is not None:
            if not np.all(np.isfinite(bv)):
                raise ValidationError("b produced non-finite values in the sample box")
            bmax = float(np.max(np.linalg.norm(bv, axis=1)))
            if bmax > self.K2_bound * (1 + tol):
                raise ValidationError(f"sampled sup |b| = {bmax:.6g} exceeds K2_bound {self.K2_bound:.6g}")

    def a_at(self, pts: np.ndarray, side: int) -> np.ndarray:
        """Diffusion matrices at ``pts`` for the requested side, shape (N, 2, 2)."""
        if side not in (1, -1):
            raise InvalidParams(f"side must be +1 or -1, got {side}")
        return self._a_fns[side](np.asarray(pts, dtype=float))

    def a_field(self, mesh: TriMesh) -> np.ndarray:
        """Per-element diffusion sampled at centroids, one-sided by the element tag."""
        cent = mesh.tri_vertices().mean(axis=1)
        out = np.empty((mesh.n_tris, 2, 2))
        for side in (1, -1):
            sel = mesh.side == side
            if np.any(sel):
                out[sel] = self.a_at(cent[sel], side)
        return out

    def q_at(self, pts: np.ndarray) -> np.ndarray:
        if callable(self.q):
            return np.asarray(self.q(pts), dtype=float)
        return np.full(pts.shape[0], float(self.q))

    def b_at(self, pts: np.ndarray) -> np.ndarray | None:
        if self.b is None:
            return None
        vals = np.asarray(self.b(pts), dtype=float)
        if vals.shape != (pts.shape[0], 2):
            raise DimensionMismatch(f"drift must return (N, 2), got {vals.shape}")
        return vals


def _p1_gradients(verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-triangle barycentric gradients (M, 2, 3) and areas (M,)."""
    x, y = verts[:, :, 0], verts[:, :, 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * np.abs(det)
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / det[:, None]
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / det[:, None]
    return np.stack([gx, gy], axis=1), area


# edge midpoints in barycentric coordinates; this rule is exact on quadratics
_MIDPOINTS = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def assemble(
    mesh: TriMesh,
    coeffs: Coefficients | PiecewiseCoefficients,
    f: Callable[[np.ndarray], np.ndarray] | None = None,
    Fvec: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Assemble the system matrix and load vector."""
    verts = mesh.tri_vertices()
    grads, area = _p1_gradients(verts)
    n = mesh.n_nodes
    m = mesh.n_tris

    a_field = coeffs.a_field(mesh)
    loc = np.einsum("mki,mkl,mlj,m->mij", grads, a_field, grads, area)

    mids = np.einsum("qk,mkd->mqd", _MIDPOINTS, verts)  # (M, 3, 2)
    flat_mids = mids.reshape(-1, 2)

    qv = coeffs.q_at(flat_mids).reshape(m, 3)
    if np.any(qv):
        w = area[:, None] / 3.0
        lam = _MIDPOINTS  # (q, 3): basis values at midpoints
        loc -= np.einsum("mq,qi,qj,mq->mij", qv, lam, lam, np.broadcast_to(w, qv.shape))

    bv = coeffs.b_at(flat_mids)
    if bv is not None:
        bv = bv.reshape(m, 3, 2)
        lam = _MIDPOINTS
        # (b . grad u_j) v_i at the midpoint rule
        conv = np.einsum("mqd,mdj,qi,m->mij", bv, grads, lam, area / 3.0)
        loc -= conv

    rows = np.repeat(mesh.tris, 3, axis=1).ravel()
    cols = np.tile(mesh.tris, (1, 3)).ravel()
    A = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    rhs = np.zeros(n)
    if f is not None:
        fv = np.asarray(f(flat_mids), dtype=float).reshape(m, 3)
        contrib = -np.einsum("mq,qi,m->mi", fv, _MIDPOINTS, area / 3.0)
        np.add.at(rhs, mesh.tris.ravel(), contrib.ravel())
    if Fvec is not None:
        Fv = np.asarray(Fvec(flat_mids), dtype=float).reshape(m, 3, 2)
        contrib = np.einsum("mqd,mdi,m->mi", Fv, grads, area / 3.0)
        np.add.at(rhs, mesh.tris.ravel(), contrib.ravel())
    return A, rhs


@dataclass
class FemSolution:
    """Nodal solution plus the pieces needed for flux recovery and evaluation."""

    mesh: TriMesh
    coeffs: Coefficients | PiecewiseCoefficients
    u: np.ndarray
    A: sp.csr_matrix
    rhs: np.ndarray
    residual: float

    def boundary_flux(self) -> tuple[np.ndarray, np.ndarray]:
        """Consistent conormal flux integrated against boundary hat functions.

        Returns (boundary node ids in loop order, flux weights). The weights
        sum edge-length-weighted normal fluxes, so dividing by the lumped
        boundary mass gives pointwise flux values.
        """
        loop = self.mesh.boundary_loop
        r = self.A @ self.u - self.rhs
        return loop, r[loop]

    def eval(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        idx, bary = self.mesh.locate(pts)
        if np.any(idx < 0):
            raise InvalidParams("evaluation point outside the meshed domain")
        return np.einsum("pk,pk->p", self.u[self.mesh.tris[idx]], bary)

    def grad_at_tris(self) -> np.ndarray:
        grads, _ = _p1_gradients(self.mesh.tri_vertices())
        return np.einsum("mdk,mk->md", grads, self.u[self.mesh.tris])


def solve_dirichlet(
    mesh: TriMesh,
    coeffs: Coefficients | PiecewiseCoefficients,
    g,
    f: Callable | None = None,
    Fvec: Callable | None = None,
    tol: float = 1e-10,
) -> FemSolution:
    """Solve the Dirichlet problem with boundary data ``g``.

    ``g`` is a callable on points or an array over all mesh nodes (only its
    boundary entries are used).
    """
    A, rhs = assemble(mesh, coeffs, f=f, Fvec=Fvec)
    n = mesh.n_nodes
    bn = mesh.boundary_nodes
    mask = np.zeros(n, dtype=bool)
    mask[bn] = True
    interior = np.nonzero(~mask)[0]

    u = np.zeros(n)
    if callable(g):
        u[bn] = np.asarray(g(mesh.nodes[bn]), dtype=float)
    else:
        g = np.asarray(g, dtype=float)
        if g.shape == (n,):
            u[bn] = g[bn]
        elif g.shape == (bn.size,):
            u[bn] = g
        else:
            raise DimensionMismatch(
                f"boundary data must be callable, ({n},) or ({bn.size},), got {g.shape}"
            )

    Aii = A[interior][:, interior].tocsc()
    rhs_i = rhs[interior] - A[interior][:, bn] @ u[bn]
    try:
        lu = spla.splu(Aii)
        ui = lu.solve(rhs_i)
    except RuntimeError as exc:
        raise SolveFailure(f"sparse LU factorization failed: {exc}") from exc
    if not np.all(np.isfinite(ui)):
        raise SolveFailure("solver produced non-finite values")
    scale = max(float(np.linalg.norm(rhs_i)), float(np.linalg.norm(Aii @ ui)), 1e-300)
    res = float(np.linalg.norm(Aii @ ui - rhs_i)) / scale
    if res > tol:
        raise SolveFailure(f"relative residual {res:.3e} exceeds tolerance {tol:.1e}")
    u[interior] = ui
    return FemSolution(mesh=mesh, coeffs=coeffs, u=u, A=A, rhs=rhs, residual=res)


# ---------------------------------------------------------------------------
# norms and errors


def _mass_matrix(mesh: TriMesh) -> sp.csr_matrix:
    area = mesh.tri_areas()
    loc = area[:, None, None] * _MASS0[None, :, :]
    rows = np.repeat(mesh.tris, 3, axis=1).ravel()
    cols = np.tile(mesh.tris, (1, 3)).ravel()
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()


def l2_norm(mesh: TriMesh, u: np.ndarray) -> float:
    M = _mass_matrix(mesh)
    return float(math.sqrt(max(u @ (M @ u), 0.0)))


def h1_seminorm(mesh: TriMesh, u: np.ndarray) -> float:
    grads, area = _p1_gradients(mesh.tri_vertices())
    g = np.einsum("mdk,mk->md", grads, u[mesh.tris])
    return float(math.sqrt(np.sum(area * np.einsum("md,md->m", g, g))))


def error_norms(
    mesh: TriMesh,
    u: np.ndarray,
    exact: Callable[[np.ndarray, np.ndarray], np.ndarray],
    exact_grad: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> dict:
    """L2 and H1 errors against a per-side exact solution.

    ``exact(pts, side)`` and ``exact_grad(pts, side)`` are evaluated with the
    triangle's phase label so jump discontinuities in derivatives across the
    interface are honored.
    """
    verts = mesh.tri_vertices()
    grads, area = _p1_gradients(verts)
    mids = np.einsum("qk,mkd->mqd", _MIDPOINTS, verts)
    uh_mid = np.einsum("qk,mk->mq", _MIDPOINTS, u[mesh.tris])
    m = mesh.n_tris
    ue_mid = np.empty((m, 3))
    for s in (-1, 1):
        sel = mesh.side == s
        pts = mids[sel].reshape(-1, 2)
        ue_mid[sel] = np.asarray(exact(pts, s), dtype=float).reshape(-1, 3)
    l2_err = math.sqrt(max(float(np.sum((area / 3.0) * np.sum((uh_mid - ue_mid) ** 2, axis=1))), 0.0))
    l2_ref = math.sqrt(max(float(np.sum((area / 3.0) * np.sum(ue_mid**2, axis=1))), 1e-300))
    out = {"l2": l2_err, "l2_rel": l2_err / l2_ref}
    if exact_grad is not None:
        gh = np.einsum("mdk,mk->md", grads, u[mesh.tris])
        ge_mid = np.empty((m, 3, 2))
        for s in (-1, 1):
            sel = mesh.side == s
            pts = mids[sel].reshape(-1, 2)
            ge_mid[sel] = np.asarray(exact_grad(pts, s), dtype=float).reshape(-1, 3, 2)
        diff = ge_mid - gh[:, None, :]
        h1_err = math.sqrt(max(float(np.sum((area / 3.0) * np.sum(diff**2, axis=(1, 2)))), 0.0))
        h1_ref = math.sqrt(max(float(np.sum((area / 3.0) * np.sum(ge_mid**2, axis=(1, 2)))), 1e-300))
        out["h1_semi"] = h1_err
        out["h1_semi_rel"] = h1_err / h1_ref
    return out


def _interface_flux_jump(
    mesh: TriMesh, u: np.ndarray, coeffs: Coefficients | PiecewiseCoefficients
) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge conormal flux jump along the interface row: (edge lengths, jumps)."""
    grads, _ = _p1_gradients(mesh.tri_vertices())
    gh = np.einsum("mdk,mk->md", grads, u[mesh.tris])
    nr1 = mesh.n_rows - 1
    mm = mesh.m_minus
    i = np.arange(mesh.n_cols - 1)
    t_below = 2 * (i * nr1 + (mm - 1)) + 1
    t_above = 2 * (i * nr1 + mm)
    pts = mesh.interface_polyline()
    e = pts[1:] - pts[:-1]
    elen = np.linalg.norm(e, axis=1)
    nrm = np.stack([-e[:, 1], e[:, 0]], axis=-1) / elen[:, None]
    flip = nrm[:, 1] < 0
    nrm[flip] = -nrm[flip]
    mids = 0.5 * (pts[1:] + pts[:-1])
    fl_above = np.einsum("eij,ej->ei", coeffs.a_at(mids, 1), gh[t_above])
    fl_below = np.einsum("eij,ej->ei", coeffs.a_at(mids, -1), gh[t_below])
    jump = np.einsum("ed,ed->e", fl_above - fl_below, nrm)
    return elen, jump


def interface_jumps(sol: FemSolution) -> dict:
    """Jump of the trace and of the conormal flux across the interface row.

    The trace jump is identically zero because interface nodes are shared;
    it is still reported, measured from the nodal values, to document that.
    """
    elen, jump = _interface_flux_jump(sol.mesh, sol.u, sol.coeffs)
    trace_jump = 0.0  # single-valued nodal field
    return {
        "flux_jump_l2": float(math.sqrt(np.sum(elen * jump**2))),
        "flux_jump_max": float(np.max(np.abs(jump))),
        "trace_jump_max": trace_jump,
        "sigma_length": float(np.sum(elen)),
    }


def verify_transmission(field, coeffs=None) -> tuple[float, float]:
    """Interface-condition audit: L2 norms over the interface of both jumps.

    ``field`` is a FemSolution or a (mesh, nodal values) pair; ``coeffs``
    defaults to the solution's own coefficients. The trace jump is 0 exactly
    because interface nodes are shared between the two sides; the conormal
    flux jump is the one-sided P1 flux mismatch, O(h) for exact solutions.
    """
    if isinstance(field, FemSolution):
        mesh, u = field.mesh, field.u
        if coeffs is None:
            coeffs = field.coeffs
    else:
        mesh, u = field
        u = np.asarray(u, dtype=float)
    if coeffs is None:
        raise InvalidParams("coefficients are required when the field is a bare (mesh, values) pair")
    if u.shape != (mesh.n_nodes,):
        raise DimensionMismatch(f"nodal values must have shape ({mesh.n_nodes},), got {u.shape}")
    elen, jump = _interface_flux_jump(mesh, u, coeffs)
    jump_u = 0.0  # shared interface nodes make the trace single-valued
    jump_flux = float(math.sqrt(np.sum(elen * jump**2)))
    return jump_u, jump_flux


# ---------------------------------------------------------------------------
# integration over sub-regions (balls, rectangles, pulled-back weight regions)


def _point_tri_dist(c: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Distance from one point to each triangle (M, 3, 2); zero inside."""
    d = np.full(verts.shape[0], np.inf)
    inside = np.ones(verts.shape[0], dtype=bool)
    for k in range(3):
        a = verts[:, k]
        b = verts[:, (k + 1) % 3]
        e = b - a
        w = c[None, :] - a
        t = np.clip(np.einsum("md,md->m", w, e) / np.maximum(np.einsum("md,md->m", e, e), 1e-300), 0, 1)
        proj = a + t[:, None] * e
        d = np.minimum(d, np.linalg.norm(c[None, :] - proj, axis=1))
        cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
        inside &= cross * _tri_orientation(verts) >= 0
    d[inside] = 0.0
    return d


def _tri_orientation(verts: np.ndarray) -> np.ndarray:
    d1 = verts[:, 1] - verts[:, 0]
    d2 = verts[:, 2] - verts[:, 0]
    return np.sign(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _classify_ball(ball: Ball, verts: np.ndarray) -> np.ndarray:
    """Exact in/out/straddle classification of triangles against a disc."""
    out = np.zeros(verts.shape[0], dtype=np.int8)
    dv = np.linalg.norm(verts - ball.center[None, None, :], axis=2)
    all_in = np.all(dv <= ball.radius, axis=1)
    out[all_in] = 1
    rest = ~all_in
    if np.any(rest):
        d = _point_tri_dist(ball.center, verts[rest])
        far = d >= ball.radius
        idx = np.nonzero(rest)[0]
        out[idx[far]] = -1
    return out


def _classify_rect(rect: Rect, verts: np.ndarray) -> np.ndarray:
    """Exact classification against a rectangle via separating axes."""
    out = np.zeros(verts.shape[0], dtype=np.int8)
    x, y = verts[:, :, 0], verts[:, :, 1]
    all_in = (
        np.all(x >= rect.x0, axis=1)
        & np.all(x <= rect.x1, axis=1)
        & np.all(y >= rect.y0, axis=1)
        & np.all(y <= rect.y1, axis=1)
    )
    out[all_in] = 1
    sep = (
        (np.max(x, axis=1) < rect.x0)
        | (np.min(x, axis=1) > rect.x1)
        | (np.max(y, axis=1) < rect.y0)
        | (np.min(y, axis=1) > rect.y1)
    )
    corners = np.array(
        [[rect.x0, rect.y0], [rect.x1, rect.y0], [rect.x1, rect.y1], [rect.x0, rect.y1]]
    )
    for k in range(3):
        e = verts[:, (k + 1) % 3] - verts[:, k]
        nrm = np.stack([-e[:, 1], e[:, 0]], axis=-1)
        pt = np.einsum("mkd,md->mk", verts - verts[:, k : k + 1], nrm)
        pr = np.einsum("cd,md->mc", corners, nrm) - np.einsum("md,md->m", verts[:, k], nrm)[:, None]
        sep |= (np.max(pt, axis=1) < np.min(pr, axis=1)) | (np.min(pt, axis=1) > np.max(pr, axis=1))
    out[sep & ~all_in] = -1
    return out


# 7-point sampling pattern for regions without an exact classifier
_SAMPLE_BARY = np.vstack([np.eye(3), _MIDPOINTS, np.full((1, 3), 1.0 / 3.0)])


def _classify_generic(region, verts: np.ndarray) -> np.ndarray:
    pts = np.einsum("qk,mkd->mqd", _SAMPLE_BARY, verts)
    flat = pts.reshape(-1, 2)
    inside = np.asarray(region.predicate(flat), dtype=bool).reshape(verts.shape[0], -1)
    out = np.zeros(verts.shape[0], dtype=np.int8)
    out[np.all(inside, axis=1)] = 1
    out[~np.any(inside, axis=1)] = -1
    return out


def _classify(region, verts: np.ndarray) -> np.ndarray:
    if isinstance(region, Ball):
        return _classify_ball(region, verts)
    if isinstance(region, Rect):
        return _classify_rect(region, verts)
    return _classify_generic(region, verts)


def region_mass_matrix(mesh: TriMesh, region, depth: int = 6) -> sp.csr_matrix:
    """Sparse mass matrix restricted to ``region``.

    Triangles fully inside contribute exactly; straddling triangles are
    subdivided ``depth`` times with exact linear restriction, and remaining
    straddling leaves use a centroid rule, so the truncation error decays
    like 2^-depth along the region boundary.
    """
    verts = mesh.tri_vertices()
    if isinstance(region, Ball):
        # cheap bounding box preselection before the exact test
        lo = region.center - region.radius
        hi = region.center + region.radius
        cand = ~(
            np.all(verts[:, :, 0] < lo[0], axis=1)
            | np.all(verts[:, :, 0] > hi[0], axis=1)
            | np.all(verts[:, :, 1] < lo[1], axis=1)
            | np.all(verts[:, :, 1] > hi[1], axis=1)
        )
    else:
        cand = np.ones(mesh.n_tris, dtype=bool)

    cls = np.full(mesh.n_tris, -1, dtype=np.int8)
    idx = np.nonzero(cand)[0]
    if idx.size:
        cls[idx] = _classify(region, verts[idx])

    rows_acc: list[np.ndarray] = []
    cols_acc: list[np.ndarray] = []
    vals_acc: list[np.ndarray] = []

    def emit(parent: np.ndarray, bary: np.ndarray, area: np.ndarray, exact: bool):
        if parent.size == 0:
            return
        if exact:
            loc = np.einsum("mqi,qr,mrj,m->mij", bary, _MASS0 * 12.0, bary, area) / 12.0
        else:
            cb = bary.mean(axis=1)
            loc = np.einsum("mi,mj,m->mij", cb, cb, area)
        tri_nodes = mesh.tris[parent]
        rows_acc.append(np.repeat(tri_nodes, 3, axis=1).ravel())
        cols_acc.append(np.tile(tri_nodes, (1, 3)).ravel())
        vals_acc.append(loc.ravel())

    base_area = mesh.tri_areas()
    full = np.nonzero(cls == 1)[0]
    emit(full, np.broadcast_to(np.eye(3), (full.size, 3, 3)), base_area[full], exact=True)

    strad = np.nonzero(cls == 0)[0]
    parent = strad
    bary = np.broadcast_to(np.eye(3), (strad.size, 3, 3)).copy()
    area = base_area[strad].copy()
    for _ in range(depth):
        if parent.size == 0:
            break
        # split each triangle into 4 via edge midpoints, in barycentric form
        b0, b1, b2 = bary[:, 0], bary[:, 1], bary[:, 2]
        m01, m12, m20 = 0.5 * (b0 + b1), 0.5 * (b1 + b2), 0.5 * (b2 + b0)
        children_bary = np.concatenate(
            [
                np.stack([b0, m01, m20], axis=1),
                np.stack([m01, b1, m12], axis=1),
                np.stack([m20, m12, b2], axis=1),
                np.stack([m01, m12, m20], axis=1),
            ]
        )
        children_parent = np.tile(parent, 4)
        children_area = np.tile(area / 4.0, 4)
        cverts = np.einsum("mqi,mid->mqd", children_bary, verts[children_parent])
        ccls = _classify(region, cverts)
        emit(children_parent[ccls == 1], children_bary[ccls == 1], children_area[ccls == 1], exact=True)
        keep = ccls == 0
        parent, bary, area = children_parent[keep], children_bary[keep], children_area[keep]
    # leftover straddling leaves: centroid rule with exact membership of the centroid
    if parent.size:
        cverts = np.einsum("mqi,mid->mqd", bary, verts[parent])
        cent = cverts.mean(axis=1)
        inside = np.asarray(region.predicate(cent) if hasattr(region, "predicate") else region.contains(cent))
        emit(parent[inside], bary[inside], area[inside], exact=False)

    n = mesh.n_nodes
    if not rows_acc:
        raise EmptyRegion("region does not meet the mesh")
    return sp.coo_matrix(
        (np.concatenate(vals_acc), (np.concatenate(rows_acc), np.concatenate(cols_acc))),
        shape=(n, n),
    ).tocsr()


def region_l2_norm(mesh: TriMesh, u: np.ndarray, region, depth: int = 6) -> float:
    M = region_mass_matrix(mesh, region, depth=depth)
    return float(math.sqrt(max(u @ (M @ u), 0.0)))
