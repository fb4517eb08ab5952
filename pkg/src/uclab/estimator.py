"""Norm measurement and inequality verification.

Every inequality has the interpolation shape

    N2 <= C * (N1 + eps)^delta * (N3 + eps)^(1 - delta)

with N1/N2/N3 the L2 norms over a small, middle, and large set. Reports
carry the measured norms together with the constants used, and the slack

    log C + delta*log(N1+eps) + (1-delta)*log(N3+eps) - log N2

which is >= 0 exactly when the inequality holds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .errors import (
    BallOutsideDomain,
    DegenerateSamples,
    EmptyRegion,
    GeometryInfeasible,
    InvalidParams,
    RadiiOrder,
)
from . import fem
from .fem import FemSolution
from .geometry import (
    Ball,
    DomainSpec,
    InterfaceChart,
    Region,
    ThreeRegionParams,
    ball_chain,
    cube_cover,
)
from .meshing import TriMesh

__all__ = [
    "TheoryConstants",
    "InequalityReport",
    "PropagationBound",
    "region_l2_norm",
    "surface_measure",
    "lift_inhomogeneous",
    "three_region_check",
    "classify_regime",
    "regime_constants",
    "three_ball_check",
    "fit_exponent",
    "propagation_check",
    "ball_l2_norm",
]

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class TheoryConstants:
    """Configured stand-ins for the existential constants of the estimates."""

    C1: float = 1.0
    C2: float = 1.0
    tau: float = 0.5
    h0: float = 0.05

    def __post_init__(self):
        if self.C1 <= 0 or self.C2 <= 0 or self.h0 <= 0:
            raise InvalidParams("C1, C2, h0 must be positive")
        if not (0.0 < self.tau < 1.0):
            raise InvalidParams(f"tau must lie in (0,1), got {self.tau}")


@dataclass(frozen=True)
class InequalityReport:
    tag: str
    N1: float
    N2: float
    N3: float
    eps: float
    fitted_C: float
    fitted_delta: float
    slack: float
    regime: str
    flags: tuple = dc_field(default=())

    def recompute_slack(self) -> float:
        return compute_slack(self.N1, self.N2, self.N3, self.eps, self.fitted_C, self.fitted_delta)

    def csv_row(self) -> str:
        return ",".join(
            [self.tag]
            + [
                f"{v:.17g}"
                for v in (self.N1, self.N2, self.N3, self.eps, self.fitted_C, self.fitted_delta, self.slack)
            ]
            + [self.regime]
        )


CSV_HEADER = "tag,N1,N2,N3,eps,C,delta,slack,regime"


def compute_slack(N1, N2, N3, eps, C, delta) -> float:
    if N2 <= 0:
        return math.inf
    return (
        math.log(max(C, _LOG_FLOOR))
        + delta * math.log(max(N1 + eps, _LOG_FLOOR))
        + (1.0 - delta) * math.log(max(N3 + eps, _LOG_FLOOR))
        - math.log(N2)
    )


@dataclass(frozen=True)
class PropagationBound:
    """Theorem-shaped constants for propagation from a ball to an interior set."""

    C1: float
    C2: float
    tau: float
    h: float
    omega_measure: float
    sigma_measure: float
    n: int = 2

    @property
    def cell_count(self) -> float:
        return self.omega_measure / self.h**self.n

    @property
    def predicted_C(self) -> float:
        return self.C1 * math.sqrt(self.cell_count)

    @property
    def predicted_delta_lower(self) -> float:
        # underflows to 0.0 for small h; use the log form for comparisons
        return self.tau ** (self.C2 * self.cell_count)

    @property
    def predicted_delta_lower_log(self) -> float:
        return self.C2 * self.cell_count * math.log(self.tau)

    @property
    def intermediate_C(self) -> float:
        """Constant shape of the intermediate (interface-weighted) estimate."""
        return (
            self.C1
            * self.cell_count
            * (1.0 + math.sqrt(self.sigma_measure / self.h ** (self.n - 1)))
        )

    def as_dict(self) -> dict:
        return {
            "C1": self.C1,
            "C2": self.C2,
            "tau": self.tau,
            "h": self.h,
            "omega_measure": self.omega_measure,
            "sigma_measure": self.sigma_measure,
            "predicted_C": self.predicted_C,
            "predicted_delta_lower": self.predicted_delta_lower,
            "predicted_delta_lower_log": self.predicted_delta_lower_log,
            "intermediate_C": self.intermediate_C,
        }


# ---------------------------------------------------------------------------
# norms over regions


def _field_parts(field) -> tuple[TriMesh, np.ndarray]:
    if isinstance(field, FemSolution):
        return field.mesh, field.u
    mesh, u = field
    return mesh, np.asarray(u, dtype=float)


def region_l2_norm(field, region, depth: int = 4) -> float:
    """L2 norm of the field over the region; 0 with a warning if they miss."""
    mesh, u = _field_parts(field)
    try:
        return fem.region_l2_norm(mesh, u, region, depth=depth)
    except EmptyRegion:
        warnings.warn("region does not meet the mesh; returning 0", stacklevel=2)
        return 0.0


def ball_depth(mesh: TriMesh, radius: float) -> int:
    """Subdivision depth resolving a ball of this radius on this mesh."""
    h = mesh.h_max()
    return int(np.clip(math.ceil(math.log2(max(8.0 * h / radius, 1.0))) + 2, 4, 12))


def _ball_l2_norm_small(mesh: TriMesh, u: np.ndarray, c: np.ndarray, radius: float) -> float | None:
    """Norm over a ball well below the mesh size, or None when unsupported.

    Inside a single triangle the field is the plane a + g.(p - c) and the
    integral over the disc is pi r^2 a^2 + pi r^4 |g|^2 / 4; a disc that
    straddles edges gets a polar Gauss grid instead (the integrand is only
    piecewise smooth there, and the chain audit tolerates quadrature noise).
    """
    ti, bary = mesh.locate(c[None, :])
    t = int(ti[0])
    if t < 0:
        return None
    v = mesh.nodes[mesh.tris[t]]
    # perpendicular distance from c to each edge of the containing triangle
    clear = math.inf
    for i in range(3):
        p, q = v[i], v[(i + 1) % 3]
        e = q - p
        clear = min(clear, abs(e[0] * (c[1] - p[1]) - e[1] * (c[0] - p[0])) / float(np.hypot(e[0], e[1])))
    uv = u[mesh.tris[t]]
    if clear >= radius:
        a = float(bary[0] @ uv)
        e1, e2 = v[1] - v[0], v[2] - v[0]
        J = np.array([e1, e2]).T
        g = np.linalg.solve(J.T, np.array([uv[1] - uv[0], uv[2] - uv[0]]))
        val = math.pi * radius**2 * a * a + 0.25 * math.pi * radius**4 * float(g @ g)
        return math.sqrt(max(val, 0.0))
    nodes_r, w_r = np.polynomial.legendre.leggauss(12)
    rho = 0.5 * radius * (nodes_r + 1.0)
    w_rho = 0.5 * radius * w_r
    na = 24
    theta = (np.arange(na) + 0.5) * (2.0 * math.pi / na)
    pts = c[None, None, :] + rho[:, None, None] * np.stack(
        [np.cos(theta), np.sin(theta)], axis=-1
    )[None, :, :]
    flat = pts.reshape(-1, 2)
    tif, bf = mesh.locate(flat)
    vals = np.zeros(flat.shape[0])
    ok = tif >= 0
    vals[ok] = np.einsum("pk,pk->p", bf[ok], u[mesh.tris[tif[ok]]])
    integon = (vals.reshape(len(rho), na) ** 2).sum(axis=1) * (2.0 * math.pi / na)
    return math.sqrt(max(float((integon * rho * w_rho).sum()), 0.0))


def ball_l2_norm(field, center, radius: float) -> float:
    mesh, u = _field_parts(field)
    c = np.asarray(center, dtype=float)
    if radius < 0.5 * mesh.h_max():
        val = _ball_l2_norm_small(mesh, u, c, radius)
        if val is not None:
            return val
    return region_l2_norm(field, Ball(c, radius), depth=ball_depth(mesh, radius))


def surface_measure(spec: DomainSpec, region=None) -> float:
    """Arc length of the interface inside a rectangle or ball (whole domain if None)."""
    if region is None:
        return spec.sigma_measure_in()
    return spec.sigma_measure_in(region)


def kappa_bound(spec: DomainSpec) -> float:
    """Constant with |interface inside B_r| <= kappa * r for every ball."""
    return 2.0 * math.sqrt(1.0 + spec.interface.slope_sup(spec.omega.x0, spec.omega.x1) ** 2)


# ---------------------------------------------------------------------------
# inhomogeneous lift


def lift_inhomogeneous(mesh: TriMesh, coeffs, f, Fvec, region) -> tuple[np.ndarray, dict]:
    """Zero-boundary solve of the inhomogeneous equation restricted to a region.

    The region is approximated by the union of mesh triangles fully inside
    it; nodes outside that union, and on its rim, are pinned to zero. The
    returned vector lives on the full mesh (zero outside the region).
    """
    verts = mesh.tri_vertices()
    cls = fem._classify(region, verts)
    inside_tris = np.nonzero(cls == 1)[0]
    if inside_tris.size == 0:
        raise EmptyRegion("no mesh triangle lies fully inside the region")
    active_nodes = np.unique(mesh.tris[inside_tris])
    # rim nodes: active nodes also touched by a non-interior triangle
    touch = np.zeros(mesh.n_nodes, dtype=bool)
    touch[np.unique(mesh.tris[cls != 1])] = True
    free = active_nodes[~touch[active_nodes]]
    A, rhs = fem.assemble(mesh, coeffs, f=f, Fvec=Fvec)
    u0 = np.zeros(mesh.n_nodes)
    if free.size:
        Aff = A[free][:, free].tocsc()
        import scipy.sparse.linalg as spla

        u0[free] = spla.splu(Aff).solve(rhs[free])
    nrm = fem.l2_norm(mesh, u0)

    mids = np.einsum("qk,mkd->mqd", fem._MIDPOINTS, verts).reshape(-1, 2)
    area = mesh.tri_areas()
    data = 0.0
    if f is not None:
        fv = np.asarray(f(mids), dtype=float).reshape(mesh.n_tris, 3)
        data += math.sqrt(float(np.sum((area / 3.0) * np.sum(fv**2, axis=1))))
    if Fvec is not None:
        Fv = np.asarray(Fvec(mids), dtype=float).reshape(mesh.n_tris, 3, 2)
        data += math.sqrt(float(np.sum((area / 3.0) * np.sum(Fv**2, axis=(1, 2)))))
    return u0, {
        "norm": nrm,
        "data_norm": data,
        "stability_ratio": nrm / data if data > 0 else 0.0,
        "n_free_nodes": int(free.size),
    }


# ---------------------------------------------------------------------------
# three-region check (exponent pinned by the construction)


def three_region_check(
    field,
    params: ThreeRegionParams,
    chart: InterfaceChart,
    eps: float,
    c_max: float | None = None,
    depth: int = 6,
    tag: str = "region",
) -> InequalityReport:
    """Check the weight-region interpolation inequality with its pinned exponent.

    The exponent is delta = R2/(2 R1 + 3 R2); C is fitted as the smallest
    constant making the inequality hold (clamped to >= 1), or taken as
    ``c_max`` when provided so the slack measures the margin against it.
    """
    if eps < 0:
        raise InvalidParams("eps must be nonnegative")
    norms = {}
    for kind in ("U1", "U2", "U3"):
        norms[kind] = region_l2_norm(field, Region(kind, params, chart), depth=depth)
    N1, N2, N3 = norms["U1"], norms["U2"], norms["U3"]
    delta = params.xi
    flags: list[str] = []
    if N1 == 0.0 and N2 == 0.0 and N3 == 0.0 and eps == 0.0:
        return InequalityReport(tag, 0.0, 0.0, 0.0, 0.0, 1.0, delta, 0.0, "region", ("degenerate",))
    c_fit = N2 / ((N1 + eps) ** delta * (N3 + eps) ** (1.0 - delta)) if N2 > 0 else 0.0
    C = c_max if c_max is not None else max(c_fit, 1.0)
    if c_max is not None and c_fit > c_max:
        flags.append("exceeds_c_max")
    slack = compute_slack(N1, N2, N3, eps, C, delta)
    return InequalityReport(tag, N1, N2, N3, eps, C, delta, slack, "region", tuple(flags))


# ---------------------------------------------------------------------------
# three-ball inequality: regimes and checks


def classify_regime(radii: Sequence[float], h0: float) -> str:
    """Case split for the ball-interpolation constants, tested in order."""
    r1, r2, r3 = radii
    if r3 - r2 < min(r1 / 20.0, h0):
        return "close"
    if r1 / 10.0 < 2.0 * h0:
        return "mid"
    return "far"


def regime_constants(
    radii: Sequence[float],
    const: TheoryConstants,
    kappa: float,
    diam: float,
    sigma_total: float,
    n: int = 2,
) -> tuple[str, float, float, float]:
    """Regime plus (predicted C, exponent base ratio, delta lower bound).

    delta_lower is tau**(C2 * ratio); for huge ratios the float underflows,
    so the ratio itself is returned for log-domain work.
    """
    r1, r2, r3 = radii
    regime = classify_regime(radii, const.h0)
    if regime == "close":
        ratio = r3**n / (r3 - r2) ** n
        C = const.C1 * ratio * (1.0 + math.sqrt(kappa * r3 ** (n - 1) / (r3 - r2) ** (n - 1)))
    elif regime == "mid":
        r3p = r2 + r1 / 21.0
        hh = r1 / 21.0
        ratio = r3p**n / hh**n
        C = const.C1 * ratio * (1.0 + math.sqrt(kappa * r3p ** (n - 1) / hh ** (n - 1)))
    else:
        ratio = diam**n / const.h0**n
        C = const.C1 * (diam**n / const.h0**n) * (
            1.0 + math.sqrt(sigma_total / const.h0 ** (n - 1))
        )
    delta_lower = const.tau ** (const.C2 * ratio)
    return regime, C, ratio, delta_lower


def three_ball_check(
    field,
    spec: DomainSpec,
    Q,
    radii: Sequence[float],
    eps: float,
    const: TheoryConstants = TheoryConstants(),
    delta: float | None = None,
    tag: str = "ball",
) -> InequalityReport:
    """Measure the three ball norms and fit C at a fixed exponent.

    The exponent defaults to the regime's lower bound when well scaled, and
    to 1/2 when that bound underflows; family-level fitting of (C, delta)
    goes through :func:`fit_exponent` instead.
    """
    r1, r2, r3 = (float(r) for r in radii)
    if not (0.0 < r1 < r2 < r3):
        raise RadiiOrder(f"radii must satisfy 0 < r1 < r2 < r3, got {radii}")
    Q = np.asarray(Q, dtype=float)
    margin = spec.omega.signed_margin(Q)
    if margin <= r3:
        raise BallOutsideDomain(
            f"dist(Q, boundary) = {margin:.6g} must exceed r3 = {r3:.6g}"
        )
    mesh, _ = _field_parts(field)
    N1 = ball_l2_norm(field, Q, r1)
    N2 = ball_l2_norm(field, Q, r2)
    N3 = ball_l2_norm(field, Q, r3)
    regime, C_pred, ratio, delta_lower = regime_constants(
        (r1, r2, r3), const, kappa_bound(spec), spec.omega.diameter, surface_measure(spec)
    )
    flags: list[str] = []
    if delta is None:
        if delta_lower > 1e-12:
            delta = delta_lower
        else:
            delta = 0.5
            flags.append("delta_lower_underflow")
    if N1 == 0.0 and N2 == 0.0 and N3 == 0.0 and eps == 0.0:
        return InequalityReport(tag, 0.0, 0.0, 0.0, 0.0, max(C_pred, 1.0), delta, 0.0, regime, ("degenerate",))
    c_fit = N2 / ((N1 + eps) ** delta * (N3 + eps) ** (1.0 - delta)) if N2 > 0 else 0.0
    C = max(c_fit, 1.0)
    if c_fit > C_pred:
        flags.append("exceeds_predicted_C")
    slack = compute_slack(N1, N2, N3, eps, C, delta)
    while slack < 0.0:
        # the touching constant must certify its own sample; nudge past the
        # one-ulp shortfall the log round trip can leave
        C = math.nextafter(C, math.inf)
        slack = compute_slack(N1, N2, N3, eps, C, delta)
    return InequalityReport(tag, N1, N2, N3, eps, C, delta, slack, regime, tuple(flags))


# ---------------------------------------------------------------------------
# empirical envelope fit


def fit_exponent(
    samples: Sequence[tuple], delta_min: float = 0.01
) -> tuple[float, float]:
    """Fit the smallest interpolation envelope over a sample family.

    Works in the log plane x = log((N1+eps)/(N3+eps)), y = log(N2/(N3+eps)):
    the envelope y <= log C + delta*x is chosen among support lines through
    sample pairs (the vertices of the feasible set cut out by the data),
    taking the feasible one with the smallest log C and delta inside
    [delta_min, 1-delta_min]; if no pair vertex is feasible the box edge
    with the smaller intercept is used. C is always recomputed as the exact
    maximum of y - delta*x so every sample's slack is nonnegative bitwise.
    """
    if len(samples) < 3:
        raise DegenerateSamples(f"need at least 3 samples, got {len(samples)}")
    xs, ys = [], []
    for N1, N2, N3, eps in samples:
        if N3 + eps <= 0:
            raise InvalidParams("each sample needs N3 + eps > 0")
        if N2 <= 0:
            continue  # trivially below any envelope
        xs.append(math.log((N1 + eps) / (N3 + eps)))
        ys.append(math.log(N2 / (N3 + eps)))
    if len(xs) < 2:
        raise DegenerateSamples("fewer than 2 samples with positive middle norm")
    x = np.asarray(xs)
    y = np.asarray(ys)
    if float(np.ptp(x)) < 1e-12:
        raise DegenerateSamples("all samples share one abscissa; slope not identifiable")

    lo, hi = delta_min, 1.0 - delta_min

    def intercept(d: float) -> float:
        return float(np.max(y - d * x))

    best: tuple[float, float, float] | None = None  # (logC, delta, tie-break delta)
    for i in range(len(x)):
        dx = x[i] - x
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = np.where(np.abs(dx) > 1e-14, (y[i] - y) / dx, np.nan)
        for d in cand[np.isfinite(cand)]:
            if not (lo <= d <= hi):
                continue
            c = intercept(float(d))
            key = (c, float(d))
            if best is None or key < (best[0], best[1]):
                best = (c, float(d), float(d))
    if best is None:
        edge = min((intercept(lo), lo), (intercept(hi), hi))
        best = (edge[0], edge[1], edge[1])
    # slack checks recompute log(C); bump C until the round trip cannot dip
    # below the exact intercept, keeping every slack nonnegative bitwise
    c = math.exp(best[0])
    while math.isfinite(c) and math.log(c) < best[0]:
        c = math.nextafter(c, math.inf)
    return c, best[1]


def envelope_slacks(samples: Sequence[tuple], C: float, delta: float) -> np.ndarray:
    """Per-sample slack of a fitted envelope, same log-plane arithmetic as the fit."""
    out = []
    logC = math.log(C)
    for N1, N2, N3, eps in samples:
        if N2 <= 0:
            out.append(math.inf)
            continue
        xv = math.log((N1 + eps) / (N3 + eps))
        yv = math.log(N2 / (N3 + eps))
        # associate exactly as the fit's intercept max(y - delta*x) does
        out.append(logC - (yv - delta * xv))
    return np.asarray(out)


# ---------------------------------------------------------------------------
# propagation certificate along chains and cubes


def propagation_check(
    fields,
    spec: DomainSpec,
    x0,
    r: float,
    h: float,
    eps: float,
    const: TheoryConstants = TheoryConstants(),
    n_audit_chains: int = 4,
    rng: np.random.Generator | None = None,
) -> tuple[list[InequalityReport], PropagationBound, dict]:
    """Constructive certificate for propagation from B_r(x0) to D.

    Builds the chain radii r3 = h/2, r2 = h/10, r1 = h/30, audits the chain
    recursion m_{k+1} <= C m_k^tau link by link on sample chains, counts the
    covering cubes, and fits the family envelope

        ||u||_D <= C_hat (||u||_{B_r} + eps)^delta_hat (||u||_Omega + eps)^(1-delta_hat)

    over the supplied fields. Returns per-field reports carrying the family
    constants, the theorem-shaped PropagationBound, and a detail dict with
    the chain audit and both certificate bounds (the honest chain-constant
    bound is astronomically large at desk scale; the envelope bound is the
    informative one).
    """
    rng = rng or np.random.default_rng(0)
    x0 = np.asarray(x0, dtype=float)
    if not h > 0 or not r > 0:
        raise InvalidParams("h and r must be positive")
    if h >= const.h0:
        raise GeometryInfeasible(f"h = {h} must stay below h0 = {const.h0}")
    if h >= r / 2.0:
        raise GeometryInfeasible(f"h = {h} must stay below r/2 = {r / 2.0}")
    D = spec.D
    if D.signed_margin(x0) < r:
        raise GeometryInfeasible("ball B_r(x0) is not contained in the observation set")

    if isinstance(fields, FemSolution) or (
        isinstance(fields, tuple) and len(fields) == 2 and isinstance(fields[0], TriMesh)
    ):
        fields = [fields]
    fields = list(fields)
    if len(fields) < 3:
        raise DegenerateSamples(
            f"the family envelope fit needs at least 3 fields, got {len(fields)}"
        )
    r1, r2, r3 = h / 30.0, h / 10.0, h / 2.0

    # family norms and envelope fit
    samples = []
    for fld in fields:
        mesh, u = _field_parts(fld)
        nB = ball_l2_norm(fld, x0, r)
        nD = region_l2_norm(fld, D, depth=4)
        nO = fem.l2_norm(mesh, u)
        samples.append((nB, nD, nO, eps))
    C_hat, delta_hat = fit_exponent(samples)
    slacks = envelope_slacks(samples, C_hat, delta_hat)
    reports = [
        InequalityReport(f"field{i}", *samples[i], C_hat, delta_hat, float(slacks[i]), "envelope")
        for i in range(len(samples))
    ]

    # covering counts
    cubes = cube_cover(spec, r1)
    bound = PropagationBound(
        C1=const.C1,
        C2=const.C2,
        tau=const.tau,
        h=h,
        omega_measure=spec.omega.area,
        sigma_measure=surface_measure(spec),
    )

    # chain audit on a few random cube centers, using the first field
    centers = cubes.centers
    dist_from_x0 = np.linalg.norm(centers - x0[None, :], axis=1)
    order = np.argsort(dist_from_x0)
    picks = [order[-1]] + list(
        rng.choice(order[: max(len(order) - 1, 1)], size=min(n_audit_chains - 1, max(len(order) - 1, 1)), replace=False)
    )
    field0 = fields[0]
    mesh0, u0 = _field_parts(field0)
    nO0 = fem.l2_norm(mesh0, u0)
    link_samples = []
    chain_info = []
    max_N = 0
    for pick in picks:
        target = centers[int(pick)]
        if D.distance(target) >= r1:
            # cube centers can sit just outside the enlarged set; pull to D
            target = np.clip(target, [D.x0 + 1e-9, D.y0 + 1e-9], [D.x1 - 1e-9, D.y1 - 1e-9])
        chain = ball_chain(spec, x0, target, r1)
        max_N = max(max_N, chain.steps)
        ball_norms = [ball_l2_norm(field0, c, r1) for c in chain.centers]
        for k in range(len(ball_norms) - 1):
            link_samples.append((ball_norms[k], ball_norms[k + 1], nO0, eps))
        chain_info.append(
            {
                "target": [float(target[0]), float(target[1])],
                "steps": chain.steps,
                "step_deviation": chain.step_deviation,
                "count_bound": chain.count_bound(spec.omega.area),
                "count_ok": chain.steps <= chain.count_bound(spec.omega.area),
            }
        )
    link_report: dict = {"n_links": len(link_samples)}
    if len(link_samples) >= 3:
        try:
            C_link, tau_link = fit_exponent(link_samples)
            ls = envelope_slacks(link_samples, C_link, tau_link)
            link_report.update(
                {
                    "C_link": C_link,
                    "C_link_augmented": C_link + 1.0,
                    "tau_link": tau_link,
                    "min_slack": float(np.min(ls)),
                    "violations": int(np.sum(ls < 0)),
                }
            )
        except DegenerateSamples:
            link_report["degenerate"] = True

    # honest chain-shaped certificate for the first field (reported as-is)
    nB0, nD0 = samples[0][0], samples[0][1]
    m0 = (nB0 + eps) / (nO0 + eps) if nO0 + eps > 0 else 0.0
    tau_c = link_report.get("tau_link", const.tau)
    C_c = link_report.get("C_link_augmented", math.e)
    N_far = max(max_N, 1)
    log_m0 = math.log(max(m0, _LOG_FLOOR))
    log_mN = (1.0 - tau_c**N_far) / (1.0 - tau_c) * math.log(max(C_c, 1.0)) + tau_c**N_far * log_m0
    chain_bound = math.sqrt(cubes.j) * math.exp(min(log_mN, 700.0)) * (nO0 + eps)
    envelope_bound = C_hat * (nB0 + eps) ** delta_hat * (nO0 + eps) ** (1.0 - delta_hat)

    details = {
        "radii": {"r1": r1, "r2": r2, "r3": r3},
        "C_hat": C_hat,
        "delta_hat": delta_hat,
        "min_slack": float(np.min(slacks)) if len(slacks) else math.inf,
        "violations": int(np.sum(slacks < 0)),
        "cube_count": cubes.j,
        "cube_count_bound": cubes.count_bound,
        "chains": chain_info,
        "links": link_report,
        "certificate": {
            "field0_D_norm": nD0,
            "envelope_bound": envelope_bound,
            "envelope_bound_holds": bool(nD0 <= envelope_bound * (1 + 1e-12)),
            "chain_bound": chain_bound,
            "chain_bound_holds": bool(nD0 <= chain_bound),
            "chain_exponent": tau_c**N_far,
            "chain_length_used": N_far,
        },
    }
    return reports, bound, details
