"""Closed-form transmission solutions used as solver oracles.

All fields here satisfy div(a grad u) = 0 on each side of a flat interface
y = level, with matching trace and conormal flux across it, so they are
exact references for the fitted solver. ``side`` follows the mesh tagging:
+1 above the interface, -1 below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import InvalidParams

__all__ = [
    "exact_flat_solution",
    "even_flat_solution",
    "linear_interface_solution",
    "charge_field",
    "Polynomial2D",
    "transmission_mismatch",
]


def _split(pts):
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    return pts[:, 0], pts[:, 1], single


@dataclass(frozen=True)
class PiecewiseField:
    """A two-sided field with analytic values and gradients.

    ``value_fn(x, y, side)`` and ``grad_fn(x, y, side)`` take coordinate
    arrays and a scalar side tag. ``bind`` closes over a domain so the field
    can be handed directly to the Dirichlet solver as boundary data.
    """

    value_fn: Callable
    grad_fn: Callable
    meta: dict = dc_field(default_factory=dict)

    def value(self, pts, side):
        x, y, single = _split(pts)
        out = self.value_fn(x, y, side)
        return float(out[0]) if single else out

    def grad(self, pts, side):
        x, y, single = _split(pts)
        out = self.grad_fn(x, y, side)
        return out[0] if single else out

    def bind(self, spec) -> "BoundField":
        return BoundField(self, spec)


@dataclass(frozen=True)
class BoundField:
    field: PiecewiseField
    spec: object

    def __call__(self, pts):
        return self.value(pts)

    def value(self, pts):
        x, y, single = _split(pts)
        side = self.spec.side(np.column_stack([x, y]))
        out = np.empty_like(x)
        for s in (-1, 1):
            sel = side == s
            if np.any(sel):
                out[sel] = self.field.value_fn(x[sel], y[sel], s)
        return float(out[0]) if single else out

    def grad(self, pts):
        x, y, single = _split(pts)
        side = self.spec.side(np.column_stack([x, y]))
        out = np.empty((x.size, 2))
        for s in (-1, 1):
            sel = side == s
            if np.any(sel):
                out[sel] = self.field.grad_fn(x[sel], y[sel], s)
        return out[0] if single else out


def exact_flat_solution(
    a_plus: float,
    a_minus: float,
    k: float,
    level: float = 0.0,
    x0: float = 0.0,
    amplitude: float = 1.0,
) -> PiecewiseField:
    """Oscillatory transmission solution cos(k(x-x0)) * sinh(k(y-level)) / a.

    Trace is continuous (both sides vanish on the interface) and the
    conormal flux matches: a * d_y u = amplitude * k * cos(k(x-x0)) on both
    sides. Each side is harmonic, so this solves the jump problem exactly.
    """
    if a_plus <= 0 or a_minus <= 0:
        raise InvalidParams("coefficients must be positive")
    if k <= 0:
        raise InvalidParams("wavenumber must be positive")

    def a_of(side):
        return a_plus if side > 0 else a_minus

    def value_fn(x, y, side):
        return amplitude * np.cos(k * (x - x0)) * np.sinh(k * (y - level)) / a_of(side)

    def grad_fn(x, y, side):
        a = a_of(side)
        gx = -amplitude * k * np.sin(k * (x - x0)) * np.sinh(k * (y - level)) / a
        gy = amplitude * k * np.cos(k * (x - x0)) * np.cosh(k * (y - level)) / a
        return np.column_stack([gx, gy])

    return PiecewiseField(value_fn, grad_fn, {"kind": "flat_sinh", "k": k, "level": level})


def even_flat_solution(
    k: float, level: float = 0.0, x0: float = 0.0, amplitude: float = 1.0
) -> PiecewiseField:
    """cos(k(x-x0)) * cosh(k(y-level)): exact for any scalar coefficient pair.

    The normal derivative vanishes on the interface, so the flux matches for
    every (a_plus, a_minus) and the trace is trivially continuous.
    """
    if k <= 0:
        raise InvalidParams("wavenumber must be positive")

    def value_fn(x, y, side):
        return amplitude * np.cos(k * (x - x0)) * np.cosh(k * (y - level))

    def grad_fn(x, y, side):
        gx = -amplitude * k * np.sin(k * (x - x0)) * np.cosh(k * (y - level))
        gy = amplitude * k * np.cos(k * (x - x0)) * np.sinh(k * (y - level))
        return np.column_stack([gx, gy])

    return PiecewiseField(value_fn, grad_fn, {"kind": "flat_cosh", "k": k, "level": level})


def linear_interface_solution(
    a_plus,
    a_minus,
    level: float = 0.0,
    alpha: float = 1.0,
    beta_minus: float = 1.0,
) -> PiecewiseField:
    """Piecewise-linear transmission solution, exact for matrix coefficients.

    u = alpha*x + beta*(y-level) with beta jumping so the conormal flux
    (a grad u) . e_y is continuous. Being piecewise linear on a fitted mesh,
    the discrete solution reproduces it to solver tolerance, which isolates
    assembly errors for anisotropic a.
    """
    Ap = np.atleast_2d(np.asarray(a_plus, dtype=float))
    Am = np.atleast_2d(np.asarray(a_minus, dtype=float))
    if Ap.shape == (1, 1):
        Ap = Ap[0, 0] * np.eye(2)
    if Am.shape == (1, 1):
        Am = Am[0, 0] * np.eye(2)
    if Ap[1, 1] <= 0:
        raise InvalidParams("a_plus[1,1] must be positive")
    beta_plus = (Am[1, 0] * alpha + Am[1, 1] * beta_minus - Ap[1, 0] * alpha) / Ap[1, 1]

    def beta_of(side):
        return beta_plus if side > 0 else beta_minus

    def value_fn(x, y, side):
        return alpha * x + beta_of(side) * (y - level)

    def grad_fn(x, y, side):
        g = np.empty((x.size, 2))
        g[:, 0] = alpha
        g[:, 1] = beta_of(side)
        return g

    return PiecewiseField(
        value_fn, grad_fn, {"kind": "linear", "beta_plus": beta_plus, "beta_minus": beta_minus}
    )


def charge_field(
    a_plus: float,
    a_minus: float,
    source,
    level: float = 0.0,
    amplitude: float = 1.0,
) -> PiecewiseField:
    """Point-source field with its image across a flat interface.

    With the source at s on one side, the field on the source side is
    (G(p,s) + R*G(p,s~))/a_src with s~ the mirror point and
    R = (a_src - a_other)/(a_src + a_other); on the other side it is
    (1+R)*G(p,s)/a_src. G is the logarithmic kernel. Trace and conormal
    flux match across y = level, and the field is an exact solution away
    from the source point, which makes it the workhorse for targets that
    fail to extend past their singularity.
    """
    if a_plus <= 0 or a_minus <= 0:
        raise InvalidParams("coefficients must be positive")
    sx, sy = float(source[0]), float(source[1])
    if sy == level:
        raise InvalidParams("source must sit off the interface")
    src_side = 1 if sy > level else -1
    a_src = a_plus if src_side > 0 else a_minus
    a_oth = a_minus if src_side > 0 else a_plus
    R = (a_src - a_oth) / (a_src + a_oth)
    my = 2.0 * level - sy  # mirror ordinate

    def _G(x, y, px, py):
        r2 = (x - px) ** 2 + (y - py) ** 2
        return -np.log(np.maximum(r2, 1e-300)) / (4.0 * math.pi)

    def _gradG(x, y, px, py):
        dx = x - px
        dy = y - py
        r2 = np.maximum(dx**2 + dy**2, 1e-300)
        return np.column_stack([-dx / (2.0 * math.pi * r2), -dy / (2.0 * math.pi * r2)])

    def value_fn(x, y, side):
        if side == src_side:
            return amplitude * (_G(x, y, sx, sy) + R * _G(x, y, sx, my)) / a_src
        return amplitude * (1.0 + R) * _G(x, y, sx, sy) / a_src

    def grad_fn(x, y, side):
        if side == src_side:
            return amplitude * (_gradG(x, y, sx, sy) + R * _gradG(x, y, sx, my)) / a_src
        return amplitude * (1.0 + R) * _gradG(x, y, sx, sy) / a_src

    return PiecewiseField(
        value_fn,
        grad_fn,
        {"kind": "charge", "source": (sx, sy), "level": level, "reflection": R},
    )


@dataclass(frozen=True)
class Polynomial2D:
    """Dense bivariate polynomial sum c[i,j] x^i y^j, closed under rescaling."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        if self.coeffs.ndim != 2:
            raise InvalidParams("coefficient table must be 2-D")

    def value(self, pts):
        x, y, single = _split(pts)
        nx, ny = self.coeffs.shape
        vx = np.vander(x, nx, increasing=True)
        vy = np.vander(y, ny, increasing=True)
        out = np.einsum("pi,ij,pj->p", vx, self.coeffs, vy)
        return float(out[0]) if single else out

    def __call__(self, pts):
        return self.value(pts)

    def scaled_pullback(self, theta: float) -> "Polynomial2D":
        """The field x -> u(theta x) / theta^2, again a polynomial."""
        if theta <= 0:
            raise InvalidParams("theta must be positive")
        nx, ny = self.coeffs.shape
        i = np.arange(nx)[:, None]
        j = np.arange(ny)[None, :]
        return Polynomial2D(self.coeffs * theta ** (i + j - 2.0))

    @staticmethod
    def random(rng: np.random.Generator, degree: int = 3) -> "Polynomial2D":
        n = degree + 1
        c = rng.standard_normal((n, n))
        # zero out terms above the total degree so scaling stays mild
        i = np.arange(n)[:, None]
        j = np.arange(n)[None, :]
        c[i + j > degree] = 0.0
        return Polynomial2D(c)


def transmission_mismatch(
    field: PiecewiseField,
    a_plus: float,
    a_minus: float,
    level: float,
    x_range: tuple[float, float],
    n: int = 512,
) -> dict:
    """Sampled trace and flux jumps of an analytic field across y = level.

    Self-check for the oracle families: both maxima should be at rounding
    level. Scalar coefficients only.
    """
    x = np.linspace(x_range[0], x_range[1], n)
    y = np.full_like(x, level)
    pts = np.column_stack([x, y])
    v_up = np.atleast_1d(field.value(pts, 1))
    v_dn = np.atleast_1d(field.value(pts, -1))
    g_up = np.atleast_2d(field.grad(pts, 1))
    g_dn = np.atleast_2d(field.grad(pts, -1))
    scale = max(float(np.max(np.abs(v_up))), 1e-30)
    fscale = max(float(np.max(np.abs(a_plus * g_up[:, 1]))), 1e-30)
    return {
        "trace_jump_max": float(np.max(np.abs(v_up - v_dn))) / scale,
        "flux_jump_max": float(np.max(np.abs(a_plus * g_up[:, 1] - a_minus * g_dn[:, 1]))) / fscale,
    }
