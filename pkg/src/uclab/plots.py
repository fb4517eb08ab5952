"""Figure rendering for the report path. Agg only, one figure per file."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_mesh",
    "plot_field",
    "plot_points",
    "plot_convergence",
    "plot_envelope",
    "plot_schedule",
]


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_mesh(mesh, path, spec=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.triplot(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.tris, lw=0.3, color="0.4")
    poly = mesh.interface_polyline()
    ax.plot(poly[:, 0], poly[:, 1], "r-", lw=1.2, label="interface")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"{mesh.n_nodes} nodes, {mesh.n_tris} triangles")
    return _save(fig, path)


def plot_field(mesh, u, path, title: str = "field") -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 6))
    tp = ax.tripcolor(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.tris, np.asarray(u), shading="gouraud")
    poly = mesh.interface_polyline()
    ax.plot(poly[:, 0], poly[:, 1], "w-", lw=0.8)
    fig.colorbar(tp, ax=ax, shrink=0.85)
    ax.set_aspect("equal")
    ax.set_title(title)
    return _save(fig, path)


def plot_points(spec, centers, path, radius: float | None = None, title: str = "centers") -> Path:
    fig, ax = plt.subplots(figsize=(6, 6))
    om = spec.omega
    ax.plot(
        [om.x0, om.x1, om.x1, om.x0, om.x0],
        [om.y0, om.y0, om.y1, om.y1, om.y0],
        "k-",
        lw=1.0,
    )
    poly = spec.sigma_polyline()
    ax.plot(poly[:, 0], poly[:, 1], "r-", lw=1.0)
    centers = np.atleast_2d(centers)
    ax.plot(centers[:, 0], centers[:, 1], "b.", ms=4)
    if radius is not None:
        th = np.linspace(0, 2 * np.pi, 64)
        for c in centers:
            ax.plot(c[0] + radius * np.cos(th), c[1] + radius * np.sin(th), "b-", lw=0.3, alpha=0.5)
    ax.set_aspect("equal")
    ax.set_title(title)
    return _save(fig, path)


def plot_convergence(hs, errors: dict, path, order_guides: tuple = (1.0, 2.0)) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    hs = np.asarray(hs, dtype=float)
    for label, errs in errors.items():
        ax.loglog(hs, errs, "o-", label=label)
    for p in order_guides:
        ref = np.asarray(errs, dtype=float)
        ax.loglog(hs, ref[0] * (hs / hs[0]) ** p, "k--", lw=0.6, alpha=0.5)
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_envelope(samples, C: float, delta: float, path) -> Path:
    """Log-plane scatter of family samples with the fitted envelope line."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    xs, ys = [], []
    for N1, N2, N3, eps in samples:
        if N2 <= 0:
            continue
        xs.append(np.log((N1 + eps) / (N3 + eps)))
        ys.append(np.log(N2 / (N3 + eps)))
    xs, ys = np.asarray(xs), np.asarray(ys)
    ax.plot(xs, ys, "o", ms=4, label="samples")
    gx = np.linspace(min(xs.min(), -1e-6), max(xs.max(), 0.0), 50)
    ax.plot(gx, np.log(C) + delta * gx, "r-", label=f"envelope: delta={delta:.3g}, C={C:.3g}")
    ax.set_xlabel("log (N1+eps)/(N3+eps)")
    ax.set_ylabel("log N2/(N3+eps)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_schedule(x, curves: dict, path, xlabel: str, ylabel: str, loglog: bool = True) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    plot = ax.loglog if loglog else ax.plot
    for label, ys in curves.items():
        xa = np.asarray(x, dtype=float)
        ya = np.asarray(ys, dtype=float)
        keep = np.isfinite(ya) & (ya > 0 if loglog else np.isfinite(ya))
        plot(xa[keep], ya[keep], "o-", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)
