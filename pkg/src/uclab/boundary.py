"""Boundary chains, trace-space surrogates, and boundary mode bases.

The boundary of a mesh is a closed polygonal chain of nodes. Fractional
trace norms are realized spectrally: with (lam_i, phi_i) the eigenpairs of
the 1-D Laplace-Beltrami pencil (S, M) on the chain,

    ||g||_{H^s}^2 = sum_i (1 + lam_i)^s <g, phi_i>_M^2

and the same weights with s < 0 give the dual norm of a functional from its
nodal weight vector. Low modes double as boundary control bases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EigSolveFailure, InvalidParams
from .geometry import Rect
from .meshing import TriMesh

__all__ = [
    "BoundaryChain",
    "boundary_chain",
    "side_masks",
    "subchain",
    "SobolevScale",
]


@dataclass(frozen=True)
class BoundaryChain:
    """Polygonal chain of boundary nodes; closed chains wrap around."""

    node_ids: np.ndarray
    points: np.ndarray
    closed: bool

    @property
    def n(self) -> int:
        return self.node_ids.size

    def seg_lengths(self) -> np.ndarray:
        p = self.points
        if self.closed:
            q = np.roll(p, -1, axis=0)
            return np.linalg.norm(q - p, axis=1)
        return np.linalg.norm(p[1:] - p[:-1], axis=1)

    def arclength(self) -> np.ndarray:
        s = np.concatenate([[0.0], np.cumsum(self.seg_lengths())])
        return s[: self.n] if self.closed else s

    def total_length(self) -> float:
        return float(np.sum(self.seg_lengths()))

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense 1-D P1 mass and stiffness on the chain."""
        n = self.n
        M = np.zeros((n, n))
        S = np.zeros((n, n))
        ls = self.seg_lengths()
        for e, l in enumerate(ls):
            i, j = e, (e + 1) % n
            M[i, i] += l / 3.0
            M[j, j] += l / 3.0
            M[i, j] += l / 6.0
            M[j, i] += l / 6.0
            S[i, i] += 1.0 / l
            S[j, j] += 1.0 / l
            S[i, j] -= 1.0 / l
            S[j, i] -= 1.0 / l
        return M, S


def boundary_chain(mesh: TriMesh) -> BoundaryChain:
    ids = mesh.boundary_loop
    return BoundaryChain(ids, mesh.nodes[ids], closed=True)


def side_masks(chain: BoundaryChain, rect: Rect, tol: float = 1e-9) -> dict:
    """Node masks for the four sides of a rectangular boundary (corners on both)."""
    x, y = chain.points[:, 0], chain.points[:, 1]
    return {
        "bottom": np.abs(y - rect.y0) <= tol,
        "right": np.abs(x - rect.x1) <= tol,
        "top": np.abs(y - rect.y1) <= tol,
        "left": np.abs(x - rect.x0) <= tol,
    }


def subchain(chain: BoundaryChain, node_mask: np.ndarray) -> tuple[BoundaryChain, np.ndarray]:
    """Extract the open chain under a contiguous mask; returns (chain, loop indices)."""
    mask = np.asarray(node_mask, dtype=bool)
    if mask.size != chain.n:
        raise InvalidParams("mask length must match the chain")
    if not np.any(mask):
        raise InvalidParams("empty boundary selection")
    if np.all(mask):
        return chain, np.arange(chain.n)
    if not chain.closed:
        raise InvalidParams("subchains are cut from the closed boundary loop")
    starts = np.nonzero(mask & ~np.roll(mask, 1))[0]
    if starts.size != 1:
        raise InvalidParams("boundary selection must be one contiguous arc")
    idx = []
    i = int(starts[0])
    while mask[i]:
        idx.append(i)
        i = (i + 1) % chain.n
    idx = np.asarray(idx, dtype=int)
    return BoundaryChain(chain.node_ids[idx], chain.points[idx], closed=False), idx


class SobolevScale:
    """Spectral surrogate for H^s norms on a boundary chain.

    ``dirichlet=True`` pins the endpoints of an open chain, which is the
    right space for controls extended by zero to the rest of the boundary.
    """

    def __init__(self, chain: BoundaryChain, dirichlet: bool = False):
        self.chain = chain
        self.dirichlet = bool(dirichlet and not chain.closed)
        M, S = chain.matrices()
        n = chain.n
        if self.dirichlet:
            keep = np.arange(1, n - 1)
        else:
            keep = np.arange(n)
        if keep.size < 2:
            raise InvalidParams("chain too short for a mode basis")
        try:
            lams, vecs = scipy.linalg.eigh(S[np.ix_(keep, keep)], M[np.ix_(keep, keep)])
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover
            raise EigSolveFailure(f"boundary eigenproblem failed: {exc}") from None
        lams = np.maximum(lams, 0.0)
        full = np.zeros((n, keep.size))
        full[keep] = vecs
        # deterministic signs: first sizable entry positive
        for j in range(full.shape[1]):
            col = full[:, j]
            nz = np.nonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))[0]
            if nz.size and col[nz[0]] < 0:
                full[:, j] = -col
        self.M = M
        self.lams = lams
        self.Phi = full

    @property
    def n_modes(self) -> int:
        return self.lams.size

    def low_modes(self, m: int) -> np.ndarray:
        """Nodal columns of the m lowest-frequency modes (full chain length)."""
        m = min(m, self.n_modes)
        return self.Phi[:, :m]

    def coefficients(self, vals: np.ndarray) -> np.ndarray:
        return self.Phi.T @ (self.M @ np.asarray(vals, dtype=float))

    def norm(self, vals: np.ndarray, s: float) -> float:
        c = self.coefficients(vals)
        return math.sqrt(float(np.sum((1.0 + self.lams) ** s * c**2)))

    def dual_norm(self, weights: np.ndarray, s: float) -> float:
        """Norm of a functional given by nodal weights w_i = <F, hat_i>."""
        c = self.Phi.T @ np.asarray(weights, dtype=float)
        return math.sqrt(float(np.sum((1.0 + self.lams) ** s * c**2)))

    def random_with_norm(
        self, rng: np.random.Generator, s: float, target: float, m: int | None = None
    ) -> np.ndarray:
        """Mean-zero random nodal vector with prescribed H^s surrogate norm."""
        m = min(m or self.n_modes, self.n_modes)
        xi = rng.standard_normal(m)
        v = self.Phi[:, :m] @ xi
        nrm = self.norm(v, s)
        if nrm == 0.0:
            return v
        return v * (target / nrm)

    def random_dual_with_norm(
        self, rng: np.random.Generator, s: float, target: float, m: int | None = None
    ) -> np.ndarray:
        """Mean-zero random functional weights with prescribed dual-norm value."""
        m = min(m or self.n_modes, self.n_modes)
        xi = rng.standard_normal(m)
        r = self.M @ (self.Phi[:, :m] @ xi)
        nrm = self.dual_norm(r, s)
        if nrm == 0.0:
            return r
        return r * (target / nrm)
