"""Command line front end.

Every command reads one JSON config, computes, then writes a results
directory (delimited tables, summary JSON, figures, manifest). Validation
problems exit 2 before anything is written; numerical failures exit 3.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import boundary_chain
from .config import (
    build_chart,
    build_coeffs,
    build_constants,
    build_spec,
    build_three_region,
    load_config,
    parse_rect,
    parse_region,
)
from .errors import ConfigError, NumericalFailure, UcLabError, ValidationError
from .estimator import (
    InequalityReport,
    PropagationBound,
    fit_exponent,
    envelope_slacks,
    propagation_check,
    three_ball_check,
    three_region_check,
)
from .experiments import (
    CauchyConfig,
    RungeConfig,
    cauchy_experiment,
    homogeneous_family,
    positive_measure_experiment,
    runge_experiment,
)
from . import fem, plots, report
from .fem import interface_jumps, solve_dirichlet
from .geometry import (
    Ball,
    Rect,
    ball_chain,
    bounding_radius_U3,
    cube_cover,
    feasible_theta,
    lemma_audit,
    safe_ball_radius_U2,
    sample_region,
    u1_clearance,
    unflatten,
    vitali_audit,
    vitali_cover,
)
from .manufactured import (
    charge_field,
    even_flat_solution,
    exact_flat_solution,
    linear_interface_solution,
)
from .meshing import build_fitted_mesh, write_mesh


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("UC_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"UC_LAB_THREADS must be an integer, got {env!r}") from None
    return 1


def _thread_map(fn, items, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _mesh_from_cfg(cfg: dict, spec):
    block = cfg.get("mesh", {})
    h = float(block.get("h", spec.h / 2.0))
    min_angle = float(block.get("min_angle", 20.0))
    return build_fitted_mesh(spec, h, min_angle_deg=min_angle)


def _scalar_coeff(coeffs) -> tuple[float, float] | None:
    ap, am = coeffs.a_plus, coeffs.a_minus
    if np.allclose(ap, ap[0, 0] * np.eye(2)) and np.allclose(am, am[0, 0] * np.eye(2)):
        return float(ap[0, 0]), float(am[0, 0])
    return None


def _field_from_block(block: dict, spec, coeffs):
    kind = block.get("kind", "flat_sinh")
    level = float(block.get("level", spec.interface.psi(np.asarray([0.5]))[0]))
    sc = _scalar_coeff(coeffs)
    if kind == "flat_sinh":
        if sc is None:
            raise ConfigError("flat_sinh oracle needs scalar coefficients")
        return exact_flat_solution(sc[0], sc[1], float(block.get("k", 2.0)), level=level,
                                   x0=float(block.get("x0", 0.0)), amplitude=float(block.get("amplitude", 1.0)))
    if kind == "flat_cosh":
        return even_flat_solution(float(block.get("k", 2.0)), level=level,
                                  x0=float(block.get("x0", 0.0)), amplitude=float(block.get("amplitude", 1.0)))
    if kind == "linear":
        return linear_interface_solution(coeffs.a_plus, coeffs.a_minus, level=level,
                                         alpha=float(block.get("alpha", 1.0)),
                                         beta_minus=float(block.get("beta_minus", 1.0)))
    if kind == "charge":
        if sc is None:
            raise ConfigError("charge oracle needs scalar coefficients")
        source = block.get("source")
        if source is None:
            raise ConfigError("charge field needs a source point")
        return charge_field(sc[0], sc[1], source, level=level, amplitude=float(block.get("amplitude", 1.0)))
    raise ConfigError(f"unknown field kind {kind!r}")


def _family_from_cfg(cfg: dict, block: dict, spec, mesh, coeffs, rng):
    sc = _scalar_coeff(coeffs)
    oracles = []
    flat = spec.interface.kind == "flat"
    if flat and sc is not None:
        level = float(spec.interface.psi(np.asarray([0.5]))[0])
        for k in block.get("oracle_k", [1.0, 2.0, 3.0]):
            oracles.append(exact_flat_solution(sc[0], sc[1], float(k), level=level))
            oracles.append(even_flat_solution(float(k), level=level))
    return homogeneous_family(
        mesh,
        coeffs,
        spec,
        rng,
        n_random=int(block.get("n_random", 8)),
        oracle_fields=oracles,
        n_modes=int(block.get("n_modes", 32)),
    )


# ---------------------------------------------------------------------------
# commands; each returns a summary dict after writing its outputs


def cmd_mesh(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    mesh = _mesh_from_cfg(cfg, spec)
    out.mkdir(parents=True, exist_ok=True)
    write_mesh(out / "mesh.txt", mesh)
    plots.plot_mesh(mesh, out / "mesh.png")
    summary = {
        "n_nodes": mesh.n_nodes,
        "n_tris": mesh.n_tris,
        "h_max": mesh.h_max(),
        "min_angle_deg": mesh.min_angle_deg(),
        "interface_nodes": int(mesh.interface_nodes.size),
    }
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_solve(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    coeffs = build_coeffs(cfg)
    mesh = _mesh_from_cfg(cfg, spec)
    block = cfg.get("solve", {})
    fieldc = _field_from_block(block.get("field", {}), spec, coeffs)
    bound = fieldc.bind(spec)
    sol = solve_dirichlet(mesh, coeffs, bound)
    errs = fem.error_norms(mesh, sol.u, fieldc.value, fieldc.grad)
    jumps = interface_jumps(sol)
    out.mkdir(parents=True, exist_ok=True)
    report.write_field_csv(out / "field.csv", sol.u)
    plots.plot_field(mesh, sol.u, out / "field.png")
    summary = {
        "residual": sol.residual,
        "l2_norm": fem.l2_norm(mesh, sol.u),
        "h1_seminorm": fem.h1_seminorm(mesh, sol.u),
        "errors": errs,
        "interface": jumps,
    }
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_regions(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    chart = build_chart(cfg, spec)
    params = build_three_region(cfg)
    block = cfg.get("regions", {})
    if block.get("auto_theta", False):
        theta, ok = feasible_theta(params, chart, float(block.get("target_radius", spec.h)))
        from dataclasses import replace

        params = replace(params, theta=theta)
    n_samples = int(block.get("n_samples", 20000))
    audit = lemma_audit(params, chart, n_samples=n_samples, rng=rng)
    n_draw = int(block.get("n_draw", 2000))
    samples = {}
    for kind in ("U1", "U2", "U3"):
        flat_pts = sample_region(kind, params, n_draw, rng)
        samples[kind] = unflatten(chart, flat_pts)
    out.mkdir(parents=True, exist_ok=True)
    for kind, pts in samples.items():
        report.write_points_csv(out / f"{kind.lower()}.csv", pts)
    allpts = np.vstack(list(samples.values()))
    plots.plot_points(spec, allpts, out / "regions.png", title="weight region samples")
    summary = {
        "xi": params.xi,
        "exponent_sum": params.xi + params.xi_complement,
        "safe_radius": safe_ball_radius_U2(params, chart),
        "bounding_radius": bounding_radius_U3(params, chart),
        "clearance": u1_clearance(params, chart),
        "theta": params.theta,
        "theorem_constant": params.theorem_constant(),
        "audit": audit,
    }
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_cover(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    block = cfg.get("cover", {})
    nu = float(block.get("nu", 1.0))
    cover = vitali_cover(spec, nu, spec.h)
    audit = vitali_audit(spec, cover)
    out.mkdir(parents=True, exist_ok=True)
    report.write_points_csv(out / "cover.csv", cover.centers)
    plots.plot_points(spec, cover.centers, out / "cover.png", radius=nu * spec.h, title="interface cover")
    summary = {"nu": nu, "h": spec.h, "sigma_measure": cover.sigma_measure, "audit": audit}
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_chain(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    block = cfg.get("chain", {})
    x0 = np.asarray(block.get("x0", [0.1, 0.5]), dtype=float)
    y = np.asarray(block.get("y", [0.9, 0.5]), dtype=float)
    r1 = float(block.get("r1", spec.h / 3.0))
    chain = ball_chain(spec, x0, y, r1)
    out.mkdir(parents=True, exist_ok=True)
    report.write_points_csv(out / "chain.csv", chain.centers)
    plots.plot_points(spec, chain.centers, out / "chain.png", radius=r1, title="ball chain")
    summary = {
        "r1": r1,
        "steps": chain.steps,
        "step_deviation": chain.step_deviation,
        "count_bound": chain.count_bound(spec.omega.area),
        "count_ok": chain.steps <= chain.count_bound(spec.omega.area),
    }
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_three_balls(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    coeffs = build_coeffs(cfg)
    const = build_constants(cfg)
    mesh = _mesh_from_cfg(cfg, spec)
    block = cfg.get("three_balls", {})
    Q = np.asarray(block.get("center", spec.omega.center), dtype=float)
    radii = tuple(float(r) for r in block.get("radii", (0.1, 0.2, 0.3)))
    eps = float(cfg.get("eps", 1e-8))
    family = _family_from_cfg(cfg, block, spec, mesh, coeffs, rng)

    def one(item):
        tag, u = item
        return three_ball_check((mesh, u), spec, Q, radii, eps, const, tag=tag)

    reports = _thread_map(one, family, threads)
    samples = [(r.N1, r.N2, r.N3, r.eps) for r in reports]
    C_hat, delta_hat = fit_exponent(samples)
    slacks = envelope_slacks(samples, C_hat, delta_hat)
    out.mkdir(parents=True, exist_ok=True)
    report.write_inequality_csv(out / "table.csv", reports)
    plots.plot_envelope(samples, C_hat, delta_hat, out / "envelope.png")
    summary = {
        "center": [float(Q[0]), float(Q[1])],
        "radii": list(radii),
        "regime": reports[0].regime if reports else "",
        "C_hat": C_hat,
        "delta_hat": delta_hat,
        "min_slack": float(np.min(slacks)),
        "violations": int(np.sum(slacks < 0)),
        "n_fields": len(family),
    }
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_three_region(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    coeffs = build_coeffs(cfg)
    mesh = _mesh_from_cfg(cfg, spec)
    chart = build_chart(cfg, spec)
    params = build_three_region(cfg)
    block = cfg.get("three_region_run", {})
    eps = float(cfg.get("eps", 1e-8))
    c_max = block.get("c_max")
    depth = int(block.get("depth", 6))
    family = _family_from_cfg(cfg, block, spec, mesh, coeffs, rng)

    def one(item):
        tag, u = item
        return three_region_check((mesh, u), params, chart, eps, c_max=c_max, depth=depth, tag=tag)

    reports = _thread_map(one, family, threads)
    out.mkdir(parents=True, exist_ok=True)
    report.write_inequality_csv(out / "table.csv", reports)
    samples = [(r.N1, r.N2, r.N3, r.eps) for r in reports if "degenerate" not in r.flags]
    summary = {
        "xi": params.xi,
        "exponent_sum": params.xi + params.xi_complement,
        "n_fields": len(family),
        "max_fitted_C": max((r.fitted_C for r in reports), default=0.0),
        "min_slack": min((r.slack for r in reports), default=math.inf),
        "negative_slack": int(sum(1 for r in reports if r.slack < 0)),
    }
    if len(samples) >= 3:
        plots.plot_envelope(samples, max(r.fitted_C for r in reports), params.xi, out / "envelope.png")
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_propagate(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    coeffs = build_coeffs(cfg)
    const = build_constants(cfg)
    mesh = _mesh_from_cfg(cfg, spec)
    block = cfg.get("propagate", {})
    x0 = np.asarray(block.get("x0", spec.D.center), dtype=float)
    r = float(block.get("r", 4.0 * spec.h))
    h = float(block.get("h", const.h0 / 2.0))
    eps = float(cfg.get("eps", 1e-8))
    family = _family_from_cfg(cfg, block, spec, mesh, coeffs, rng)
    fields = [(mesh, u) for _, u in family]
    reports, bound, details = propagation_check(
        fields, spec, x0, r, h, eps, const, rng=rng
    )
    from dataclasses import replace

    reports = [replace(rep, tag=tag) for rep, (tag, _) in zip(reports, family)]
    out.mkdir(parents=True, exist_ok=True)
    report.write_inequality_csv(out / "table.csv", reports)
    report.write_json(out / "bound.json", {"bound": bound.as_dict(), "details": details})
    cubes = cube_cover(spec, h / 30.0)
    stride = max(1, cubes.centers.shape[0] // 20000)
    plots.plot_points(spec, cubes.centers[::stride], out / "cubes.png", title="cube cover centers")
    samples = [(rp.N1, rp.N2, rp.N3, rp.eps) for rp in reports]
    plots.plot_envelope(samples, details["C_hat"], details["delta_hat"], out / "envelope.png")
    summary = {
        "C_hat": details["C_hat"],
        "delta_hat": details["delta_hat"],
        "violations": details["violations"],
        "certificate": details["certificate"],
        "predicted_C": bound.predicted_C,
        "predicted_delta_lower_log": bound.predicted_delta_lower_log,
    }
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_sweep(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    const = build_constants(cfg)
    block = cfg.get("sweep", {})
    h_values = [float(h) for h in block.get("h_values", [0.05, 0.025, 0.0125])]
    nu = float(block.get("nu", 1.0))
    x0 = np.asarray(block.get("x0", [spec.omega.x0 + 0.15, spec.omega.y0 + 0.5]), dtype=float)
    y = np.asarray(block.get("y", [spec.omega.x1 - 0.15, spec.omega.y0 + 0.5]), dtype=float)

    def one(h):
        from .geometry import DomainSpec

        sp = DomainSpec(omega=spec.omega, interface=spec.interface, h=h)
        cover = vitali_cover(sp, nu, h)
        audit = vitali_audit(sp, cover)
        r1 = h / 3.0
        chain = ball_chain(sp, x0, y, r1)
        cubes = cube_cover(sp, h / 30.0)
        pb = PropagationBound(
            C1=const.C1, C2=const.C2, tau=const.tau, h=h,
            omega_measure=sp.omega.area, sigma_measure=sp.sigma_measure_in(),
        )
        return {
            "h": h,
            "vitali_n": audit["n"],
            "vitali_disjoint": audit["disjoint"],
            "vitali_misses": audit["coverage_misses"],
            "chain_steps": chain.steps,
            "chain_bound": chain.count_bound(sp.omega.area),
            "cube_j": cubes.j,
            "cube_bound": cubes.count_bound,
            "predicted_C": pb.predicted_C,
            "predicted_delta_lower_log": pb.predicted_delta_lower_log,
        }

    rows = _thread_map(one, h_values, threads)
    out.mkdir(parents=True, exist_ok=True)
    header = list(rows[0].keys())
    report.write_rows_csv(out / "table.csv", header, rows)
    plots.plot_schedule(
        [r["h"] for r in rows],
        {"vitali_n": [r["vitali_n"] for r in rows], "cube_j": [r["cube_j"] for r in rows]},
        out / "counts.png",
        xlabel="h",
        ylabel="count",
    )
    by_h = sorted(rows, key=lambda r: r["h"], reverse=True)
    logs = [r["predicted_delta_lower_log"] for r in by_h]
    summary = {
        "h_values": h_values,
        "delta_lower_log_decreasing": bool(np.all(np.diff(logs) < 0)),
        "rows": len(rows),
    }
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_cauchy(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    coeffs = build_coeffs(cfg)
    mesh = _mesh_from_cfg(cfg, spec)
    block = cfg.get("cauchy", {})
    truth = _field_from_block(block.get("truth", {"kind": "charge", "source": [0.5, 1.6]}), spec, coeffs)
    dflt = CauchyConfig()
    ccfg = CauchyConfig(
        gamma_sides=tuple(block.get("gamma_sides", dflt.gamma_sides)),
        eta_schedule=tuple(float(e) for e in block.get("eta_schedule", dflt.eta_schedule)),
        h_schedule=tuple(float(h) for h in block.get("h_schedule", dflt.h_schedule)),
        n_control_modes=int(block.get("n_control_modes", dflt.n_control_modes)),
        n_data_modes=int(block.get("n_data_modes", dflt.n_data_modes)),
        n_repeats=int(block.get("n_repeats", dflt.n_repeats)),
    )
    alpha = block.get("alpha")
    rows, summary = cauchy_experiment(spec, mesh, coeffs, truth, ccfg, rng=rng, alpha=alpha)
    out.mkdir(parents=True, exist_ok=True)
    header = ["eta", "h", "err", "forward_err", "err_omega", "alpha", "misfit", "control_norm"]
    report.write_rows_csv(out / "table.csv", header, rows)
    curves = {}
    etas = sorted({r["eta"] for r in rows if r["eta"] > 0})
    for h in ccfg.h_schedule:
        curves[f"h={h:g}"] = [next(r["err"] for r in rows if r["h"] == h and r["eta"] == e) for e in etas]
    if etas:
        plots.plot_schedule(etas, curves, out / "errors.png", xlabel="eta", ylabel="L2 error")
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_runge(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    coeffs = build_coeffs(cfg)
    mesh = _mesh_from_cfg(cfg, spec)
    block = cfg.get("runge", {})
    rcfg = RungeConfig(
        d_rect=parse_rect(block["d_rect"]["polygon"]) if "d_rect" in block else RungeConfig().d_rect,
        d_tilde_rect=parse_rect(block["d_tilde_rect"]["polygon"]) if "d_tilde_rect" in block else RungeConfig().d_tilde_rect,
        gamma_sides=tuple(block.get("gamma_sides", ["bottom", "right", "top", "left"])),
        eps_schedule=tuple(float(e) for e in block.get("eps_schedule", [0.2, 0.1, 0.05, 0.02])),
        n_control_modes=int(block.get("n_control_modes", 48)),
    )
    rows, summary = runge_experiment(spec, mesh, coeffs, rcfg, rng=rng)
    out.mkdir(parents=True, exist_ok=True)
    header = ["target", "eps", "discrepancy", "in_band", "control_norm", "alpha", "audit_mismatch"]
    report.write_rows_csv(out / "table.csv", header, rows)
    targets = sorted({r["target"] for r in rows})
    epss = sorted({r["eps"] for r in rows}, reverse=True)
    curves = {
        t: [next(r["control_norm"] for r in rows if r["target"] == t and r["eps"] == e) for e in epss]
        for t in targets
    }
    plots.plot_schedule(epss, curves, out / "control.png", xlabel="eps", ylabel="control norm")
    report.write_json(out / "summary.json", summary)
    return summary


def cmd_positive_measure(cfg, out: Path, rng, threads: int) -> dict:
    spec = build_spec(cfg)
    coeffs = build_coeffs(cfg)
    mesh = _mesh_from_cfg(cfg, spec)
    block = cfg.get("positive_measure", {})
    E = parse_region(block.get("E", {"kind": "ball", "center": [0.5, 0.8], "radius": 0.08}))
    h = float(block.get("h", spec.h))
    etas = [float(e) for e in block.get("eta_schedule", [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6])]
    rows, summary = positive_measure_experiment(
        spec, mesh, coeffs, E, h, etas, n_modes=int(block.get("n_modes", 64))
    )
    out.mkdir(parents=True, exist_ok=True)
    header = ["eta", "E_norm", "omega_h_norm", "omega_norm", "ball_norm", "mu_lagrange", "flags"]
    report.write_rows_csv(out / "table.csv", header, rows)
    plots.plot_schedule(
        [r["eta"] for r in rows],
        {"omega_h_norm": [r["omega_h_norm"] for r in rows], "ball_norm": [r["ball_norm"] for r in rows]},
        out / "decay.png",
        xlabel="eta",
        ylabel="norm",
    )
    report.write_json(out / "summary.json", summary)
    return summary


COMMANDS = {
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "regions": cmd_regions,
    "cover": cmd_cover,
    "chain": cmd_chain,
    "three-balls": cmd_three_balls,
    "three-region": cmd_three_region,
    "propagate": cmd_propagate,
    "sweep": cmd_sweep,
    "cauchy": cmd_cauchy,
    "runge": cmd_runge,
    "positive-measure": cmd_positive_measure,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uc-lab", description="interface transmission estimates at desk scale")
    p.add_argument("--version", action="version", version=f"uc-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to the JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (default results/<command>)")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed override")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (or UC_LAB_THREADS)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        threads = _threads(args.threads)
        out = Path(args.out) if args.out else Path("results") / args.command
        rng = np.random.default_rng(seed)
        COMMANDS[args.command](cfg, out, rng, threads)
        report.write_manifest(out, args.command, cfg, seed, threads)
    except ValidationError as exc:
        print(f"uc-lab: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"uc-lab: numerical failure: {exc}", file=sys.stderr)
        return 3
    except UcLabError as exc:  # pragma: no cover
        print(f"uc-lab: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
