"""Interface charts, weight-function regions, and covering constructions.

Everything here is two dimensional. An interface is the graph of a C^2
function crossing a rectangular domain left to right. Local charts recentre
and rotate the graph so it is tangent to the horizontal axis at the chart
center, and the flattening map straightens it. The three regions attached to
a quadratic weight

    z(x, y) = alpha_minus*y/delta + beta*y^2/(2*delta^2) - x^2/(2*delta)

live in the flattened frame, scaled by a factor theta in (0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import (
    CoverFailure,
    GeometryInfeasible,
    InvalidParams,
    OutOfChart,
    PathNotFound,
)

__all__ = [
    "Ball",
    "Rect",
    "InterfaceGraph",
    "DomainSpec",
    "InterfaceChart",
    "chart_at",
    "flatten",
    "unflatten",
    "ThreeRegionParams",
    "Region",
    "eval_z",
    "region_contains",
    "safe_ball_radius_U2",
    "bounding_radius_U3",
    "u1_clearance",
    "region_integral",
    "sample_region",
    "lemma_audit",
    "random_admissible_setup",
    "VitaliCover",
    "vitali_cover",
    "vitali_audit",
    "BallChain",
    "ball_chain",
    "CubeCover",
    "cube_cover",
    "feasible_theta",
]

_UNIT_BALL_AREA = math.pi  # n = 2


def _as_points(p) -> tuple[np.ndarray, bool]:
    """Return (pts, was_single) with pts of shape (N, 2)."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != 2:
            raise InvalidParams(f"point must have two coordinates, got shape {arr.shape}")
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidParams(f"points must have shape (N, 2), got {arr.shape}")
    return arr, False


# ---------------------------------------------------------------------------
# balls and rectangles


@dataclass(frozen=True)
class Ball:
    """Closed disc given by center and radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidParams(f"ball radius must be positive and finite, got {self.radius}")

    def contains(self, pts) -> np.ndarray:
        pts, single = _as_points(pts)
        ok = np.linalg.norm(pts - self.center[None, :], axis=1) <= self.radius
        return bool(ok[0]) if single else ok

    def predicate(self, pts):
        return self.contains(pts)

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InvalidParams(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)])

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, pts) -> np.ndarray:
        pts, single = _as_points(pts)
        ok = (
            (pts[:, 0] >= self.x0)
            & (pts[:, 0] <= self.x1)
            & (pts[:, 1] >= self.y0)
            & (pts[:, 1] <= self.y1)
        )
        return bool(ok[0]) if single else ok

    def signed_margin(self, pts) -> np.ndarray:
        """Distance to the boundary, positive inside, negative outside."""
        pts, single = _as_points(pts)
        m = np.minimum.reduce(
            [pts[:, 0] - self.x0, self.x1 - pts[:, 0], pts[:, 1] - self.y0, self.y1 - pts[:, 1]]
        )
        return float(m[0]) if single else m

    def distance(self, pts) -> np.ndarray:
        """Euclidean distance to the solid rectangle (0 inside)."""
        pts, single = _as_points(pts)
        dx = np.maximum(np.maximum(self.x0 - pts[:, 0], pts[:, 0] - self.x1), 0.0)
        dy = np.maximum(np.maximum(self.y0 - pts[:, 1], pts[:, 1] - self.y1), 0.0)
        d = np.hypot(dx, dy)
        return float(d[0]) if single else d

    def eroded(self, margin: float) -> "Rect":
        if 2 * margin >= min(self.width, self.height):
            raise InvalidParams(f"erosion margin {margin} swallows rectangle {self}")
        return Rect(self.x0 + margin, self.x1 - margin, self.y0 + margin, self.y1 - margin)

    def bbox_dilated(self, margin: float) -> "Rect":
        return Rect(self.x0 - margin, self.x1 + margin, self.y0 - margin, self.y1 + margin)


# ---------------------------------------------------------------------------
# global interface graphs


@dataclass(frozen=True)
class InterfaceGraph:
    """Global interface y = psi(x), given with two derivatives."""

    kind: str
    psi: Callable[[np.ndarray], np.ndarray]
    dpsi: Callable[[np.ndarray], np.ndarray]
    d2psi: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    @staticmethod
    def flat(level: float) -> "InterfaceGraph":
        lv = float(level)
        return InterfaceGraph(
            kind="flat",
            psi=lambda x: np.full_like(np.asarray(x, dtype=float), lv),
            dpsi=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            d2psi=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            params={"level": lv},
        )

    @staticmethod
    def parabola(level: float, curvature: float, x_center: float = 0.5) -> "InterfaceGraph":
        lv, c, xc = float(level), float(curvature), float(x_center)
        return InterfaceGraph(
            kind="parabola",
            psi=lambda x: lv + c * (np.asarray(x, dtype=float) - xc) ** 2,
            dpsi=lambda x: 2.0 * c * (np.asarray(x, dtype=float) - xc),
            d2psi=lambda x: np.full_like(np.asarray(x, dtype=float), 2.0 * c),
            params={"level": lv, "curvature": c, "x_center": xc},
        )

    @staticmethod
    def spline(xs: Sequence[float], ys: Sequence[float]) -> "InterfaceGraph":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 4:
            raise InvalidParams("spline interface needs >= 4 matched knots")
        if np.any(np.diff(xs) <= 0):
            raise InvalidParams("spline knots must be strictly increasing")
        sp = CubicSpline(xs, ys, bc_type="natural")
        return InterfaceGraph(
            kind="spline",
            psi=sp,
            dpsi=sp.derivative(1),
            d2psi=sp.derivative(2),
            params={"x": xs.tolist(), "y": ys.tolist()},
        )

    def point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([x, np.asarray(self.psi(x), dtype=float)], axis=-1)

    def slope_sup(self, x_lo: float, x_hi: float, n: int = 2048) -> float:
        xs = np.linspace(x_lo, x_hi, n)
        return float(np.max(np.abs(self.dpsi(xs))))


# ---------------------------------------------------------------------------
# domain specification


@dataclass(frozen=True)
class DomainSpec:
    """Rectangular domain split in two by an interface graph.

    The observation set D is either given explicitly or derived as the
    erosion of omega by the margin h. Construction checks that the graph
    actually separates omega into two components and that D keeps the
    declared distance from the boundary.
    """

    omega: Rect
    interface: InterfaceGraph
    h: float
    d_rect: Rect | None = None

    def __post_init__(self):
        if self.h <= 0:
            raise InvalidParams("margin h must be positive")
        xs = np.linspace(self.omega.x0, self.omega.x1, 1024)
        ys = np.asarray(self.interface.psi(xs), dtype=float)
        if np.any(ys <= self.omega.y0) or np.any(ys >= self.omega.y1):
            raise InvalidParams("interface must cross omega strictly between bottom and top")
        d = self.D
        margin = min(
            d.x0 - self.omega.x0,
            self.omega.x1 - d.x1,
            d.y0 - self.omega.y0,
            self.omega.y1 - d.y1,
        )
        if margin < self.h - 1e-12:
            raise InvalidParams(
                f"observation set keeps distance {margin:.6g} < h = {self.h:.6g} from the boundary"
            )

    @property
    def D(self) -> Rect:
        return self.d_rect if self.d_rect is not None else self.omega.eroded(self.h)

    def in_omega(self, pts):
        return self.omega.contains(pts)

    def in_D(self, pts):
        return self.D.contains(pts)

    def side(self, pts) -> np.ndarray:
        """+1 above the interface, -1 below."""
        pts, single = _as_points(pts)
        s = np.where(pts[:, 1] > np.asarray(self.interface.psi(pts[:, 0]), dtype=float), 1, -1)
        return int(s[0]) if single else s

    def sigma_polyline(self, n: int = 2048) -> np.ndarray:
        xs = np.linspace(self.omega.x0, self.omega.x1, n)
        return self.interface.point(xs)

    def sigma_intervals_in(self, rect: Rect, n_scan: int = 4096) -> list[tuple[float, float]]:
        """Parameter intervals where the graph point lies in ``rect``."""
        xs = np.linspace(self.omega.x0, self.omega.x1, n_scan)
        marg = rect.signed_margin(self.interface.point(xs))

        def f(x):
            return rect.signed_margin(self.interface.point(np.array([x]))[0])

        inside = marg > 0
        if not inside.any():
            return []
        edges: list[float] = []
        for i in range(n_scan - 1):
            if inside[i] != inside[i + 1]:
                edges.append(brentq(f, xs[i], xs[i + 1], xtol=1e-13))
        bounds = sorted(edges)
        if inside[0]:
            bounds.insert(0, xs[0])
        if inside[-1]:
            bounds.append(xs[-1])
        return [(bounds[i], bounds[i + 1]) for i in range(0, len(bounds) - 1, 2)]

    def sigma_measure_in(self, rect: Rect | None = None, n_gauss: int = 64) -> float:
        """Arc length of the interface inside ``rect`` (default: inside omega)."""
        rect = rect or self.omega
        gx, gw = np.polynomial.legendre.leggauss(n_gauss)
        total = 0.0
        for a, b in self.sigma_intervals_in(rect):
            xm, xr = 0.5 * (a + b), 0.5 * (b - a)
            xq = xm + xr * gx
            total += xr * float(np.sum(gw * np.sqrt(1.0 + np.asarray(self.interface.dpsi(xq)) ** 2)))
        return total


# ---------------------------------------------------------------------------
# local charts and the flattening map


def _c2_sup(psi, dpsi, d2psi, r0: float, n: int = 1025) -> float:
    xs = np.linspace(-r0, r0, n)
    return float(
        max(
            np.max(np.abs(np.asarray(psi(xs), dtype=float))),
            np.max(np.abs(np.asarray(dpsi(xs), dtype=float))),
            np.max(np.abs(np.asarray(d2psi(xs), dtype=float))),
        )
    )


def _zeta_sup(psi, r0: float, d2_at_0: float, n: int = 2048) -> float:
    xs = np.geomspace(1e-6 * r0, r0, n)
    xs = np.concatenate([-xs[::-1], xs])
    vals = np.abs(np.asarray(psi(xs), dtype=float)) / xs**2
    return float(max(np.max(vals), 0.5 * abs(d2_at_0)))


@dataclass(frozen=True)
class InterfaceChart:
    """Recentred local graph of the interface.

    ``rotation`` maps global displacements to local coordinates in which the
    interface is the graph of ``psi`` with psi(0) = 0 and psi'(0) = 0. The
    chart is valid on the cylinder |x| < r0, |y| <= K0*r0^2/2, and ``zeta_norm``
    is sup |psi(x)| / x^2 over the chart.
    """

    center: np.ndarray
    rotation: np.ndarray
    psi: Callable[[np.ndarray], np.ndarray]
    dpsi: Callable[[np.ndarray], np.ndarray]
    d2psi: Callable[[np.ndarray], np.ndarray]
    r0: float
    K0: float
    zeta_norm: float

    def __post_init__(self):
        if self.r0 <= 0 or self.K0 <= 0:
            raise InvalidParams("chart needs r0 > 0 and K0 > 0")
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (2, 2) or not np.allclose(R.T @ R, np.eye(2), atol=1e-12):
            raise InvalidParams("rotation must be a 2x2 orthogonal matrix")
        p0 = float(np.asarray(self.psi(np.zeros(1)), dtype=float)[0])
        d0 = float(np.asarray(self.dpsi(np.zeros(1)), dtype=float)[0])
        if abs(p0) > 1e-9 or abs(d0) > 1e-9:
            raise InvalidParams(
                f"chart graph not normalized: psi(0) = {p0:.3e}, psi'(0) = {d0:.3e}"
            )
        sup = _c2_sup(self.psi, self.dpsi, self.d2psi, self.r0)
        if sup > self.K0 * (1 + 1e-8) + 1e-12:
            raise InvalidParams(f"C2 norm {sup:.6g} of chart graph exceeds K0 = {self.K0:.6g}")

    @property
    def half_height(self) -> float:
        return 0.5 * self.K0 * self.r0**2

    @staticmethod
    def flat(center=(0.0, 0.0), r0: float = 1.0, K0: float = 1.0) -> "InterfaceChart":
        z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return InterfaceChart(
            center=np.asarray(center, dtype=float),
            rotation=np.eye(2),
            psi=z,
            dpsi=z,
            d2psi=z,
            r0=float(r0),
            K0=float(K0),
            zeta_norm=0.0,
        )

    @staticmethod
    def parabola(curvature: float, center=(0.0, 0.0), r0: float = 1.0, K0: float | None = None) -> "InterfaceChart":
        c = float(curvature)
        k0 = float(K0) if K0 is not None else max(2.0 * abs(c), 1.0)
        return InterfaceChart(
            center=np.asarray(center, dtype=float),
            rotation=np.eye(2),
            psi=lambda x: c * np.asarray(x, dtype=float) ** 2,
            dpsi=lambda x: 2.0 * c * np.asarray(x, dtype=float),
            d2psi=lambda x: np.full_like(np.asarray(x, dtype=float), 2.0 * c),
            r0=float(r0),
            K0=k0,
            zeta_norm=abs(c),
        )

    def to_local(self, pts) -> np.ndarray:
        pts, single = _as_points(pts)
        loc = (pts - self.center[None, :]) @ self.rotation.T
        return loc[0] if single else loc

    def to_global(self, loc) -> np.ndarray:
        loc, single = _as_points(loc)
        pts = loc @ self.rotation + self.center[None, :]
        return pts[0] if single else pts

    def in_cylinder(self, loc, tol: float = 1e-12) -> np.ndarray:
        loc, single = _as_points(loc)
        ok = (np.abs(loc[:, 0]) < self.r0 * (1 + tol)) & (
            np.abs(loc[:, 1]) <= self.half_height * (1 + tol) + tol
        )
        return bool(ok[0]) if single else ok

    def sigma_local(self, n: int = 2048) -> np.ndarray:
        xs = np.linspace(-self.r0, self.r0, n)
        return np.stack([xs, np.asarray(self.psi(xs), dtype=float)], axis=-1)


def chart_at(graph: InterfaceGraph, x_center: float, r0: float, K0: float, n_knots: int = 129) -> InterfaceChart:
    """Build the chart of ``graph`` centred at the graph point over ``x_center``.

    The tangent at the center is rotated to the horizontal axis and the
    rotated curve is re-graphed by one dimensional root finding (tolerance
    1e-12), then represented as a cubic spline on the chart interval.
    """
    xc = float(x_center)
    P = graph.point(np.array([xc]))[0]
    m = float(np.asarray(graph.dpsi(np.array([xc])), dtype=float)[0])
    c = 1.0 / math.sqrt(1.0 + m * m)
    s = m * c
    R = np.array([[c, s], [-s, c]])  # maps the unit tangent (1, m)/|..| to (1, 0)

    if graph.kind == "flat":
        return InterfaceChart.flat(center=P, r0=r0, K0=K0)

    def local_x(t):
        return c * (t - P[0]) + s * (float(graph.psi(np.array([t]))[0]) - P[1])

    def local_y(t):
        return -s * (t - P[0]) + c * (float(graph.psi(np.array([t]))[0]) - P[1])

    span = 2.0 * r0 * (1.0 + abs(m))
    xi = np.linspace(-r0, r0, n_knots)
    eta = np.empty_like(xi)
    for i, x in enumerate(xi):
        lo, hi = xc - span, xc + span
        flo, fhi = local_x(lo) - x, local_x(hi) - x
        grow = 0
        while flo * fhi > 0 and grow < 30:
            lo -= span
            hi += span
            flo, fhi = local_x(lo) - x, local_x(hi) - x
            grow += 1
        if flo * fhi > 0:
            raise InvalidParams(f"cannot re-graph interface near x = {xc}: not graph-like in chart")
        t = brentq(lambda tt: local_x(tt) - x, lo, hi, xtol=1e-13)
        eta[i] = local_y(t)
    mid = n_knots // 2
    eta[mid] = 0.0  # the center itself, exact by construction
    sp = CubicSpline(xi, eta, bc_type="natural")
    d1, d2 = sp.derivative(1), sp.derivative(2)
    zeta = _zeta_sup(sp, r0, float(d2(0.0)))
    return InterfaceChart(
        center=P,
        rotation=R,
        psi=sp,
        dpsi=d1,
        d2psi=d2,
        r0=float(r0),
        K0=float(K0),
        zeta_norm=zeta,
    )


def flatten(chart: InterfaceChart, p) -> np.ndarray:
    """Map a global point to flattened chart coordinates (x, y - psi(x))."""
    loc, single = _as_points(chart.to_local(p))
    ok = chart.in_cylinder(loc)
    ok = np.asarray([ok]) if isinstance(ok, bool) else ok
    if not np.all(ok):
        bad = loc[~ok][0]
        raise OutOfChart(f"point with local coordinates {bad} leaves the chart cylinder")
    out = np.stack([loc[:, 0], loc[:, 1] - np.asarray(chart.psi(loc[:, 0]), dtype=float)], axis=-1)
    return out[0] if single else out


def unflatten(chart: InterfaceChart, q) -> np.ndarray:
    """Inverse of :func:`flatten`."""
    q, single = _as_points(q)
    loc = np.stack([q[:, 0], q[:, 1] + np.asarray(chart.psi(q[:, 0]), dtype=float)], axis=-1)
    ok = chart.in_cylinder(loc)
    ok = np.asarray([ok]) if isinstance(ok, bool) else ok
    if not np.all(ok):
        bad = loc[~ok][0]
        raise OutOfChart(f"point with local coordinates {bad} leaves the chart cylinder")
    out = chart.to_global(loc)
    return out if not single else np.asarray(out)[0] if np.asarray(out).ndim == 2 else out


# ---------------------------------------------------------------------------
# weight parameters and regions


@dataclass(frozen=True)
class ThreeRegionParams:
    """Parameters of the quadratic weight and its three regions.

    The derived aspect ratio is a = alpha_plus/delta and the interpolation
    exponent is xi = R2/(2*R1 + 3*R2). Scale caps R1, R2 <= R_cap and the
    shrink factor theta in (0, 1] control how much of the chart the regions
    occupy.
    """

    R1: float
    R2: float
    alpha_plus: float = 1.0
    alpha_minus: float = 1.0
    beta: float = 1.0
    delta: float = 0.5
    tau0: float = 1.0
    carleman_C: float = 1.0
    R_cap: float = 1.0
    theta: float = 1.0
    delta0: float = 1.0

    def __post_init__(self):
        pos = {
            "R1": self.R1,
            "R2": self.R2,
            "alpha_plus": self.alpha_plus,
            "alpha_minus": self.alpha_minus,
            "beta": self.beta,
            "delta": self.delta,
            "tau0": self.tau0,
            "carleman_C": self.carleman_C,
            "R_cap": self.R_cap,
            "delta0": self.delta0,
        }
        for name, v in pos.items():
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParams(f"{name} must be a positive finite real, got {v}")
        if self.delta >= self.delta0:
            raise InvalidParams(f"delta = {self.delta} must stay below the cap delta0 = {self.delta0}")
        if self.R1 > self.R_cap or self.R2 > self.R_cap:
            raise InvalidParams("R1 and R2 must not exceed R_cap")
        if not (0.0 < self.theta <= 1.0):
            raise InvalidParams(f"theta must lie in (0, 1], got {self.theta}")

    @property
    def a(self) -> float:
        return self.alpha_plus / self.delta

    @property
    def xi(self) -> float:
        if self.R1 == self.R2:
            # the ratio collapses to 1/5; dividing out R first avoids roundoff
            return 0.2
        return self.R2 / (2.0 * self.R1 + 3.0 * self.R2)

    @property
    def xi_complement(self) -> float:
        # defined as the partition of 1 so the exponent sum is exact
        return 1.0 - self.xi

    @property
    def rho1(self) -> float:
        return self.alpha_minus * self.delta / (self.delta + self.beta)

    def rho2(self, zeta_norm: float) -> float:
        if zeta_norm <= 0.0:
            return math.inf
        return (math.sqrt(6.0) - 2.0) / (2.0 * zeta_norm)

    @property
    def rho3(self) -> float:
        return 2.0 * self.alpha_minus * self.delta / self.beta

    @property
    def branch_vertex(self) -> float:
        """y coordinate of the weight parabola vertex; regions live to its right."""
        return -self.alpha_minus * self.delta / self.beta

    @property
    def u3_radicand(self) -> float:
        return self.alpha_minus**2 - 8.0 * self.beta * self.R2

    @property
    def R0_sq(self) -> float:
        return (
            2.0 * self.alpha_minus * self.R1 / self.a
            + self.beta * self.R1**2 / (self.a**2 * self.delta)
            + 8.0 * self.delta * self.R2
        )

    def theorem_constant(self) -> float:
        """Shape of the three-region constant at the configured parameters."""
        return self.carleman_C * math.sqrt(
            math.exp(self.tau0 * self.R2) + self.carleman_C * self.R1**-4
        )


def eval_z(params: ThreeRegionParams, point) -> np.ndarray:
    """Evaluate the quadratic weight argument in flattened, scaled coordinates."""
    pts, single = _as_points(point)
    x, y = pts[:, 0], pts[:, 1]
    z = (
        params.alpha_minus * y / params.delta
        + params.beta * y**2 / (2.0 * params.delta**2)
        - x**2 / (2.0 * params.delta)
    )
    return float(z[0]) if single else z


_REGION_KINDS = ("U1", "U2", "U3")


def _in_scaled_region(kind: str, params: ThreeRegionParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Membership in the unit-scale region, restricted to the near branch.

    The raw inequalities also admit a second component far below the
    interface where the quadratic in y turns around; the preimage estimates
    only cover the component right of the parabola vertex, so membership is
    restricted to y >= -alpha_minus*delta/beta.
    """
    p = params
    z = (
        p.alpha_minus * y / p.delta
        + p.beta * y**2 / (2.0 * p.delta**2)
        - x**2 / (2.0 * p.delta)
    )
    a = p.a
    branch = y >= p.branch_vertex
    if kind == "U1":
        return (z >= -4.0 * p.R2) & (y > p.R1 / (8.0 * a)) & (y < p.R1 / a)
    if kind == "U2":
        return (z >= -p.R2) & (z <= p.R1 / (2.0 * a)) & (y < p.R1 / (8.0 * a)) & branch
    if kind == "U3":
        return (z >= -4.0 * p.R2) & (y < p.R1 / a) & branch
    raise InvalidParams(f"unknown region kind {kind!r}")


@dataclass(frozen=True)
class Region:
    """One of the three weight regions, pulled back through a chart.

    Membership of a global point p: apply the chart rigid motion, flatten,
    divide by theta, then test the defining inequalities.
    """

    kind: str
    params: ThreeRegionParams
    chart: InterfaceChart

    def __post_init__(self):
        if self.kind not in _REGION_KINDS:
            raise InvalidParams(f"region kind must be one of {_REGION_KINDS}, got {self.kind!r}")

    def contains(self, p) -> bool:
        """Strict membership test; raises OutOfChart off the chart cylinder."""
        q = flatten(self.chart, p)
        q, single = _as_points(q)
        sc = q / self.params.theta
        ok = _in_scaled_region(self.kind, self.params, sc[:, 0], sc[:, 1])
        return bool(ok[0]) if single else ok

    def predicate(self, pts) -> np.ndarray:
        """Total membership function: False wherever the chart does not apply."""
        pts, single = _as_points(pts)
        loc = (pts - self.chart.center[None, :]) @ self.chart.rotation.T
        okc = self.chart.in_cylinder(loc)
        out = np.zeros(pts.shape[0], dtype=bool)
        if np.any(okc):
            lx = loc[okc, 0]
            fy = loc[okc, 1] - np.asarray(self.chart.psi(lx), dtype=float)
            th = self.params.theta
            out[okc] = _in_scaled_region(self.kind, self.params, lx / th, fy / th)
        return bool(out[0]) if single else out


def region_contains(region: Region, p) -> bool:
    return region.contains(p)


# ---------------------------------------------------------------------------
# preimage radii


def safe_ball_radius_U2(params: ThreeRegionParams, chart: InterfaceChart) -> float:
    """Radius of a ball at the chart center whose image stays inside theta*U2."""
    p = params
    a = p.a
    candidates = [
        p.delta * p.R1 / (6.0 * a * p.alpha_minus),
        2.0 * p.delta * p.R2 / (3.0 * p.alpha_minus),
        p.R1 / (12.0 * a),
        chart.r0 / p.theta,
        p.rho1,
        p.rho2(chart.zeta_norm),
        p.rho3,
    ]
    r = p.theta * min(candidates)
    if not (r > 0 and math.isfinite(r)):
        raise InvalidParams(f"safe ball radius degenerates to {r}")
    return r


def bounding_radius_U3(params: ThreeRegionParams, chart: InterfaceChart) -> float:
    """Radius of a ball at the chart center containing the preimage of theta*U3."""
    p = params
    if p.u3_radicand < 0:
        raise InvalidParams(
            f"alpha_minus^2 - 8*beta*R2 = {p.u3_radicand:.6g} < 0: shrink R2"
        )
    zq = 1.0 + 2.0 * chart.zeta_norm**2
    a = p.a
    root = math.sqrt(p.u3_radicand)
    val = (
        zq * (2.0 * p.alpha_minus * p.R1 / a + 8.0 * p.delta * p.R2)
        + (2.0 + zq * p.beta / p.delta) * p.R1**2 / a**2
        + 128.0 * p.delta**2 * p.R2**2 / (p.alpha_minus + root) ** 2
    )
    return p.theta * math.sqrt(val)


def u1_clearance(params: ThreeRegionParams, chart: InterfaceChart) -> float:
    """Lower bound on the distance between the preimage of theta*U1 and the interface."""
    p = params
    if chart.K0**2 * p.R0_sq >= 1.0:
        raise InvalidParams(
            f"clearance needs K0^2 * R0^2 < 1, got {chart.K0**2 * p.R0_sq:.6g}"
        )
    return p.theta * p.R1 / (16.0 * p.a)


def feasible_theta(params: ThreeRegionParams, chart: InterfaceChart, h: float) -> tuple[float, bool]:
    """Shrink factor placing the U3 bounding ball at diameter h.

    Returns (theta, feasible). Infeasible means the requested h exceeds what
    theta <= 1 can reach; the capped value 1.0 is returned alongside.
    """
    base = ThreeRegionParams(
        **{**{f: getattr(params, f) for f in (
            "R1", "R2", "alpha_plus", "alpha_minus", "beta", "delta",
            "tau0", "carleman_C", "R_cap", "delta0")}, "theta": 1.0}
    )
    d = bounding_radius_U3(base, chart)
    theta = 0.5 * h / d
    return (theta, True) if theta <= 1.0 else (1.0, False)


# ---------------------------------------------------------------------------
# exact slice decomposition of the regions (used by quadrature and samplers)


def _branch_root(params: ThreeRegionParams, c: float, x: np.ndarray) -> np.ndarray:
    """Solve z(x, y) = c for y on the increasing branch."""
    p = params
    A = p.alpha_minus / p.delta
    B = p.beta / (2.0 * p.delta**2)
    rad = A * A + 4.0 * B * (c + x**2 / (2.0 * p.delta))
    rad = np.maximum(rad, 0.0)
    return (-A + np.sqrt(rad)) / (2.0 * B)


def _region_slices(kind: str, params: ThreeRegionParams):
    """Return (x_max, breakpoints, interval_fn) for the unit-scale region.

    interval_fn maps x arrays to (lo, hi) arrays of the y interval; the
    breakpoints split |x| into pieces on which lo and hi are smooth.
    """
    p = params
    a = p.a
    if kind == "U3":
        x_max = math.sqrt(p.R0_sq)
        y_top = p.R1 / a

        def interval(x):
            lo = _branch_root(p, -4.0 * p.R2, x)
            return lo, np.full_like(lo, y_top)

        return x_max, [], interval
    if kind == "U1":
        x_max = math.sqrt(p.R0_sq)
        y_bot, y_top = p.R1 / (8.0 * a), p.R1 / a
        sw_sq = 2.0 * p.delta * (
            p.alpha_minus * y_bot / p.delta
            + p.beta * y_bot**2 / (2.0 * p.delta**2)
            + 4.0 * p.R2
        )
        breaks = [math.sqrt(sw_sq)] if 0.0 < sw_sq < x_max**2 else []

        def interval(x):
            lo = np.maximum(_branch_root(p, -4.0 * p.R2, x), y_bot)
            return lo, np.full_like(lo, y_top)

        return x_max, breaks, interval
    if kind == "U2":
        y_top = p.R1 / (8.0 * a)
        xm_sq = 2.0 * p.delta * (
            p.alpha_minus * y_top / p.delta
            + p.beta * y_top**2 / (2.0 * p.delta**2)
            + p.R2
        )
        x_max = math.sqrt(xm_sq)
        sw_sq = 2.0 * p.delta * (
            p.alpha_minus * y_top / p.delta
            + p.beta * y_top**2 / (2.0 * p.delta**2)
            - p.R1 / (2.0 * a)
        )
        breaks = [math.sqrt(sw_sq)] if 0.0 < sw_sq < xm_sq else []

        def interval(x):
            lo = _branch_root(p, -p.R2, x)
            hi = np.minimum(_branch_root(p, p.R1 / (2.0 * a), x), y_top)
            return lo, hi

        return x_max, breaks, interval
    raise InvalidParams(f"unknown region kind {kind!r}")


def region_integral(
    kind: str,
    params: ThreeRegionParams,
    f: Callable[[np.ndarray], np.ndarray],
    theta: float | None = None,
    n_gauss: int = 48,
) -> float:
    """Integrate ``f`` over the scaled region in flattened coordinates.

    The y direction is resolved exactly through the quadratic roots of the
    weight, so a tensor Gauss rule converges at spectral rate for smooth
    integrands.
    """
    th = params.theta if theta is None else float(theta)
    x_max, breaks, interval = _region_slices(kind, params)
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    cuts = sorted({0.0, *breaks, x_max})
    total = 0.0
    for lo_c, hi_c in zip(cuts[:-1], cuts[1:]):
        for sgn in (-1.0, 1.0):
            xa, xb = sgn * hi_c, sgn * lo_c
            if xa > xb:
                xa, xb = xb, xa
            xm, xr = 0.5 * (xa + xb), 0.5 * (xb - xa)
            if xr <= 0:
                continue
            xq = xm + xr * gx
            ylo, yhi = interval(xq)
            yr = 0.5 * np.maximum(yhi - ylo, 0.0)
            ym = 0.5 * (yhi + ylo)
            # quadrature nodes in the theta-scaled frame
            Y = th * (ym[:, None] + yr[:, None] * gx[None, :])
            X = np.broadcast_to(th * xq[:, None], Y.shape)
            pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
            vals = np.asarray(f(pts), dtype=float).reshape(Y.shape)
            inner = (th * yr) * (vals @ gw)
            total += (th * xr) * float(np.dot(gw, inner))
    return total


def sample_region(
    kind: str,
    params: ThreeRegionParams,
    n: int,
    rng: np.random.Generator,
    max_tries: int = 200,
) -> np.ndarray:
    """Draw uniform samples from the scaled region, in flattened coordinates."""
    p = params
    x_max, _, interval = _region_slices(kind, p)
    probe = np.linspace(-x_max, x_max, 512)
    lo, hi = interval(probe)
    y_lo, y_hi = float(np.min(lo)), float(np.max(hi))
    out = np.empty((0, 2))
    for _ in range(max_tries):
        if out.shape[0] >= n:
            break
        m = max(2 * (n - out.shape[0]), 128)
        x = rng.uniform(-x_max, x_max, m)
        y = rng.uniform(y_lo, y_hi, m)
        keep = _in_scaled_region(kind, p, x, y)
        out = np.vstack([out, np.stack([x[keep], y[keep]], axis=-1)])
    if out.shape[0] < n:
        raise CoverFailure(f"rejection sampling of {kind} stalled at {out.shape[0]}/{n}")
    return p.theta * out[:n]


# ---------------------------------------------------------------------------
# lemma audits


def _dist_to_polyline_dense(pts: np.ndarray, poly: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Vectorized distance from points to a polyline, all segments per point."""
    seg_a = poly[:-1]
    seg_v = poly[1:] - poly[:-1]
    seg_len2 = np.maximum(np.einsum("ij,ij->i", seg_v, seg_v), 1e-300)
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], chunk):
        blk = pts[s : s + chunk]
        d = blk[:, None, :] - seg_a[None, :, :]
        t = np.clip(np.einsum("pki,ki->pk", d, seg_v) / seg_len2[None, :], 0.0, 1.0)
        proj = d - t[:, :, None] * seg_v[None, :, :]
        out[s : s + chunk] = np.sqrt(np.min(np.einsum("pki,pki->pk", proj, proj), axis=1))
    return out


def _dist_to_polyline(pts: np.ndarray, poly: np.ndarray, k: int = 8) -> np.ndarray:
    """Exact distance from points to a polyline.

    Only segments incident to the k nearest vertices are tried; a point is
    settled once its best candidate beats the lower bound d_k - max segment
    length that holds for every other segment, and the rare stragglers fall
    back to the dense sweep.
    """
    nseg = poly.shape[0] - 1
    if nseg < 1:
        raise InvalidParams("polyline needs at least two vertices")
    seg_a = poly[:-1]
    seg_v = poly[1:] - poly[:-1]
    seg_len2 = np.maximum(np.einsum("ij,ij->i", seg_v, seg_v), 1e-300)
    smax = float(np.sqrt(np.max(seg_len2)))
    kk = min(k, poly.shape[0])
    dv, iv = cKDTree(poly).query(pts, k=kk)
    if kk == 1:
        dv, iv = dv[:, None], iv[:, None]
    cand = np.concatenate([np.clip(iv - 1, 0, nseg - 1), np.clip(iv, 0, nseg - 1)], axis=1)
    a = seg_a[cand]
    v = seg_v[cand]
    l2 = seg_len2[cand]
    d = pts[:, None, :] - a
    t = np.clip(np.einsum("pki,pki->pk", d, v) / l2, 0.0, 1.0)
    proj = d - t[..., None] * v
    best = np.sqrt(np.min(np.einsum("pki,pki->pk", proj, proj), axis=1))
    # every other segment has both endpoints at distance >= dv_k, hence
    # distance >= sqrt(dv_k^2 - (smax/2)^2); points beating that are settled
    floor = np.sqrt(np.maximum(dv[:, -1] ** 2 - 0.25 * smax**2, 0.0))
    unresolved = best > floor
    if np.any(unresolved):
        best[unresolved] = _dist_to_polyline_dense(pts[unresolved], poly)
    return best


def lemma_audit(
    params: ThreeRegionParams,
    chart: InterfaceChart,
    n_samples: int = 100_000,
    rng: np.random.Generator | None = None,
) -> dict:
    """Monte Carlo audit of the three preimage statements.

    Checks that (i) the safe ball at the chart center lands in theta*U2,
    (ii) the preimage of theta*U3 sits inside its bounding ball, and
    (iii) the preimage of theta*U1 keeps the stated clearance from the
    interface. Returns violation counts and achieved margins.
    """
    rng = rng or np.random.default_rng(0)
    res: dict = {"n_samples": n_samples}

    # (i) safe ball into U2
    r_safe = safe_ball_radius_U2(params, chart)
    u = rng.uniform(0.0, 1.0, n_samples)
    ang = rng.uniform(0.0, 2.0 * math.pi, n_samples)
    rad = r_safe * np.sqrt(u)
    ball = chart.center[None, :] + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1)
    inside = Region("U2", params, chart).predicate(ball)
    res["safe_radius"] = r_safe
    res["u2_violations"] = int(np.sum(~inside))

    # (ii) U3 preimage bounded
    r_box = bounding_radius_U3(params, chart)
    flat_pts = sample_region("U3", params, n_samples, rng)
    glob = unflatten(chart, flat_pts)
    dist = np.linalg.norm(glob - chart.center[None, :], axis=1)
    res["bounding_radius"] = r_box
    res["u3_violations"] = int(np.sum(dist > r_box * (1.0 + 1e-12)))
    res["u3_max_ratio"] = float(np.max(dist) / r_box)

    # (iii) U1 clearance from the interface
    clear = u1_clearance(params, chart)
    flat_u1 = sample_region("U1", params, n_samples, rng)
    glob1 = unflatten(chart, flat_u1)
    poly = chart.to_global(chart.sigma_local(4096))
    dev = chart.K0 * (2.0 * chart.r0 / 4095) ** 2 / 8.0  # polyline sag bound
    d1 = _dist_to_polyline(glob1, poly) - dev
    res["clearance"] = clear
    res["u1_violations"] = int(np.sum(d1 <= clear))
    res["u1_min_distance"] = float(np.min(d1))
    res["violations"] = res["u2_violations"] + res["u3_violations"] + res["u1_violations"]
    return res


def random_admissible_setup(
    rng: np.random.Generator, curved: bool = False, theta: float | None = None
) -> tuple[ThreeRegionParams, InterfaceChart]:
    """Draw a parameter set and chart satisfying every audit precondition."""
    r0 = 1.0
    K0 = float(rng.uniform(0.5, 2.0))
    curv = float(rng.uniform(-0.5, 0.5) * K0) if curved else 0.0
    chart = (
        InterfaceChart.parabola(curv, r0=r0, K0=K0)
        if curved
        else InterfaceChart.flat(r0=r0, K0=K0)
    )
    alpha_plus = float(rng.uniform(0.5, 2.0))
    alpha_minus = float(rng.uniform(0.5, 2.0))
    beta = float(rng.uniform(0.5, 2.0))
    delta = float(rng.uniform(0.15, 0.85))
    th = float(theta if theta is not None else rng.choice([0.25, 0.5, 1.0]))
    R_cap = 0.25
    R1 = float(rng.uniform(0.02, 1.0)) * R_cap
    R2 = float(rng.uniform(0.02, 1.0)) * min(R_cap, 0.1 * alpha_minus**2 / beta)

    for _ in range(60):
        params = ThreeRegionParams(
            R1=R1, R2=R2, alpha_plus=alpha_plus, alpha_minus=alpha_minus,
            beta=beta, delta=delta, R_cap=R_cap, theta=th,
        )
        R0 = math.sqrt(params.R0_sq)
        y_low = (params.delta / params.beta) * (
            params.alpha_minus - math.sqrt(max(params.u3_radicand, 0.0))
        )
        y_extent = th * max(params.R1 / params.a, y_low) + chart.zeta_norm * (th * R0) ** 2
        ok = (
            params.u3_radicand >= 0.25 * alpha_minus**2
            and K0 * R0 <= 0.9
            and R0 <= 0.9
            and th * R0 <= 0.9 * r0
            and y_extent <= 0.9 * chart.half_height
        )
        if ok:
            return params, chart
        R1 *= 0.65
        R2 *= 0.65
    raise InvalidParams("failed to shrink parameters into the admissible range")


# ---------------------------------------------------------------------------
# coverings: greedy interface cover, ball chains, cube covers


@dataclass(frozen=True)
class VitaliCover:
    """Disjoint balls on the interface whose dilations cover its neighborhood."""

    centers: np.ndarray
    nu: float
    h: float
    sigma_measure: float
    count_constant: float  # N * h^{n-1} / |interface inside D|

    @property
    def n(self) -> int:
        return int(self.centers.shape[0])

    def count_bound(self, C: float) -> float:
        return C * self.sigma_measure / self.h


def vitali_cover(spec: DomainSpec, nu: float, h: float) -> VitaliCover:
    """Greedy farthest-point packing of radius nu*h balls centred on the interface.

    Accepted centers are pairwise at distance >= 2*nu*h, so the nu*h balls are
    disjoint; maximality makes the 5*nu*h dilations cover the nu*h neighborhood
    of the interface inside D.
    """
    if nu <= 0 or h <= 0:
        raise InvalidParams("nu and h must be positive")
    D = spec.D
    intervals = spec.sigma_intervals_in(D)
    if not intervals:
        raise CoverFailure("interface does not meet the observation set")
    slope = spec.interface.slope_sup(spec.omega.x0, spec.omega.x1)
    dx = (nu * h / 10.0) / math.sqrt(1.0 + slope**2)
    xs = np.concatenate(
        [np.linspace(a, b, max(int(math.ceil((b - a) / dx)) + 1, 2)) for a, b in intervals]
    )
    samples = spec.interface.point(xs)
    sigma_d = spec.sigma_measure_in(D)

    cap = int(math.ceil(4.0 * sigma_d / (nu * h))) + 16
    centers = [samples[0]]
    dist = np.linalg.norm(samples - samples[0], axis=1)
    while True:
        i = int(np.argmax(dist))
        if dist[i] < 2.0 * nu * h:
            break
        centers.append(samples[i])
        if len(centers) > cap:
            raise CoverFailure(f"greedy cover exceeded {cap} centers")
        dist = np.minimum(dist, np.linalg.norm(samples - samples[i], axis=1))
    centers = np.asarray(centers)
    const = centers.shape[0] * h / sigma_d
    return VitaliCover(centers=centers, nu=nu, h=h, sigma_measure=sigma_d, count_constant=const)


def vitali_audit(spec: DomainSpec, cover: VitaliCover, n_along: int = 4096, n_across: int = 9) -> dict:
    """Audit disjointness, tube coverage by the 5x dilations, and the count bound."""
    c = cover.centers
    nu_h = cover.nu * cover.h
    gap = np.inf
    if c.shape[0] > 1:
        diff = c[:, None, :] - c[None, :, :]
        dd = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(dd, np.inf)
        gap = float(np.min(dd))
    xs = np.linspace(spec.omega.x0, spec.omega.x1, n_along)
    base = spec.interface.point(xs)
    slope = np.asarray(spec.interface.dpsi(xs), dtype=float)
    nrm = np.stack([-slope, np.ones_like(slope)], axis=-1)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    offs = np.linspace(-nu_h, nu_h, n_across) * (1.0 - 1e-9)
    tube = (base[:, None, :] + offs[None, :, None] * nrm[:, None, :]).reshape(-1, 2)
    tube = tube[spec.in_D(tube)]
    dmin = np.full(tube.shape[0], np.inf)
    for j in range(c.shape[0]):
        dmin = np.minimum(dmin, np.linalg.norm(tube - c[j][None, :], axis=1))
    misses = int(np.sum(dmin > 5.0 * nu_h))
    return {
        "n": cover.n,
        "min_center_gap": gap,
        "disjoint": bool(gap >= 2.0 * nu_h - 1e-12),
        "tube_points": int(tube.shape[0]),
        "coverage_misses": misses,
        "count_constant": cover.count_constant,
    }


@dataclass(frozen=True)
class BallChain:
    """Centers along a path, spaced exactly two radii apart (last step shorter)."""

    centers: np.ndarray
    r1: float
    path: np.ndarray
    step_deviation: float  # max | |c_{k+1}-c_k| - 2 r1 | over the uniform steps

    @property
    def steps(self) -> int:
        return int(self.centers.shape[0]) - 1

    def count_bound(self, omega_area: float) -> float:
        return omega_area / (_UNIT_BALL_AREA * self.r1**2)


def _grid_bfs_path(
    inside: Callable[[np.ndarray], np.ndarray],
    bbox: Rect,
    cell: float,
    start: np.ndarray,
    goal: np.ndarray,
) -> np.ndarray:
    """Shortest 8-connected grid path between grid points nearest start/goal."""
    nx = int(math.ceil((bbox.x1 - start[0]) / cell)) + 1
    mx = int(math.ceil((start[0] - bbox.x0) / cell)) + 1
    ny = int(math.ceil((bbox.y1 - start[1]) / cell)) + 1
    my = int(math.ceil((start[1] - bbox.y0) / cell)) + 1
    gx = start[0] + np.arange(-mx, nx + 1) * cell
    gy = start[1] + np.arange(-my, ny + 1) * cell
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=-1)
    mask = inside(nodes).reshape(X.shape)
    si, sj = mx, my
    if not mask[si, sj]:
        raise PathNotFound("start point is not in the connecting set")
    # goal snaps to the nearest admissible grid node
    d_goal = np.where(mask.ravel(), np.linalg.norm(nodes - goal[None, :], axis=1), np.inf)
    gidx = int(np.argmin(d_goal))
    gi, gj = np.unravel_index(gidx, X.shape)

    level = np.full(mask.shape, -1, dtype=np.int32)
    level[si, sj] = 0
    frontier = np.zeros_like(mask)
    frontier[si, sj] = True
    shifts = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    step = 0
    while frontier.any() and level[gi, gj] < 0:
        step += 1
        nxt = np.zeros_like(mask)
        for di, dj in shifts:
            src = frontier[
                max(-di, 0) : mask.shape[0] - max(di, 0),
                max(-dj, 0) : mask.shape[1] - max(dj, 0),
            ]
            nxt[
                max(di, 0) : mask.shape[0] - max(-di, 0),
                max(dj, 0) : mask.shape[1] - max(-dj, 0),
            ] |= src
        nxt &= mask & (level < 0)
        level[nxt] = step
        frontier = nxt
    if level[gi, gj] < 0:
        raise PathNotFound("breadth-first search found no path in the connecting set")

    path = [(gi, gj)]
    ci, cj = gi, gj
    while level[ci, cj] > 0:
        want = level[ci, cj] - 1
        for di, dj in shifts:
            ni, nj = ci + di, cj + dj
            if 0 <= ni < mask.shape[0] and 0 <= nj < mask.shape[1] and level[ni, nj] == want:
                ci, cj = ni, nj
                break
        else:
            raise PathNotFound("backtracking failed; inconsistent level field")
        path.append((ci, cj))
    path.reverse()
    pts = np.array([[gx[i], gy[j]] for i, j in path])
    return np.vstack([pts, goal[None, :]])


def _last_crossing(poly: np.ndarray, start_idx: int, start_frac: float, center: np.ndarray, radius: float):
    """Last parameter along the polyline suffix where |gamma - center| = radius."""
    P = poly
    for i in range(P.shape[0] - 2, start_idx - 1, -1):
        a = P[i] if i > start_idx else P[i] + start_frac * (P[i + 1] - P[i])
        e = P[i + 1] - a
        v = a - center
        A = float(e @ e)
        if A <= 0:
            continue
        B = 2.0 * float(v @ e)
        C = float(v @ v) - radius**2
        disc = B * B - 4.0 * A * C
        if disc < 0:
            continue
        sq = math.sqrt(disc)
        for s in ((-B + sq) / (2 * A), (-B - sq) / (2 * A)):
            if -1e-12 <= s <= 1.0 + 1e-12:
                s = min(max(s, 0.0), 1.0)
                frac = s if i > start_idx else start_frac + s * (1.0 - start_frac)
                return i, frac, a + s * e
    return None


def ball_chain(spec: DomainSpec, x0, y, r1: float) -> BallChain:
    """Chain of ball centers from x0 to y through the r1 enlargement of D.

    The connecting path is the straight segment whenever a sampled margin
    certificate shows it stays in the enlargement (always, for the convex
    rectangle D); otherwise breadth-first search on an 8-connected grid of
    cell size r1/4. Centers advance to the last point of the path at
    distance exactly 2*r1 from the previous center, which keeps the balls
    up to the final one pairwise disjoint.
    """
    x0 = np.asarray(x0, dtype=float)
    y = np.asarray(y, dtype=float)
    if r1 <= 0:
        raise InvalidParams("r1 must be positive")
    D = spec.D
    if not (D.distance(x0) < r1 and D.distance(y) < r1):
        raise InvalidParams("both endpoints must lie within r1 of the observation set")
    inside = lambda pts: D.distance(pts) < r1
    cell = r1 / 4.0
    seg = y - x0
    n_probe = max(int(math.ceil(float(np.linalg.norm(seg)) / cell)) + 1, 2)
    probe = x0[None, :] + np.linspace(0.0, 1.0, n_probe)[:, None] * seg[None, :]
    # the distance field is 1-Lipschitz, so interior probes this deep in the
    # enlargement certify the whole segment
    if bool(np.all(D.distance(probe[1:-1]) < r1 - 0.6 * cell)) :
        poly = np.vstack([x0[None, :], y[None, :]])
    else:
        poly = _grid_bfs_path(inside, D.bbox_dilated(r1), cell, x0, y)

    centers = [x0.copy()]
    idx, frac = 0, 0.0
    dev = 0.0
    cap = int(np.sum(np.linalg.norm(np.diff(poly, axis=0), axis=1)) / (2.0 * r1)) + 16
    while np.linalg.norm(y - centers[-1]) > 2.0 * r1:
        hit = _last_crossing(poly, idx, frac, centers[-1], 2.0 * r1)
        if hit is None:
            raise PathNotFound("chain step found no crossing at distance 2*r1")
        idx, frac, pt = hit
        dev = max(dev, abs(float(np.linalg.norm(pt - centers[-1])) - 2.0 * r1))
        centers.append(pt)
        if len(centers) > cap:
            raise CoverFailure(f"ball chain exceeded {cap} steps")
    if np.linalg.norm(y - centers[-1]) > 1e-9 * r1:
        centers.append(y.copy())
    return BallChain(centers=np.asarray(centers), r1=r1, path=poly, step_deviation=dev)


@dataclass(frozen=True)
class CubeCover:
    """Axis-aligned squares of side 2*r1/sqrt(2) meeting D, with their ball centers."""

    centers: np.ndarray
    side: float
    r1: float
    count_bound: float

    @property
    def j(self) -> int:
        return int(self.centers.shape[0])


def cube_cover(spec: DomainSpec, r1: float) -> CubeCover:
    """Grid squares intersecting D, each inside the closed r1 ball at its center."""
    if r1 <= 0:
        raise InvalidParams("r1 must be positive")
    s = 2.0 * r1 / math.sqrt(2.0)
    D = spec.D
    ox, oy = spec.omega.x0, spec.omega.y0
    kx0 = int(math.ceil((D.x0 - ox) / s)) - 1
    kx1 = int(math.floor((D.x1 - ox) / s))
    ky0 = int(math.ceil((D.y0 - oy) / s)) - 1
    ky1 = int(math.floor((D.y1 - oy) / s))
    kx = np.arange(kx0, kx1 + 1)
    ky = np.arange(ky0, ky1 + 1)
    cx = ox + (kx + 0.5) * s
    cy = oy + (ky + 0.5) * s
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    centers = np.stack([X.ravel(), Y.ravel()], axis=-1)
    bound = 2.0 * spec.omega.area / (4.0 * r1**2)  # n^{n/2} |Omega| / (2^n r1^n), n = 2
    return CubeCover(centers=centers, side=s, r1=r1, count_bound=bound)
