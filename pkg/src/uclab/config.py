"""JSON run configuration: parsing, validation, canonical hashing.

A config file fully determines a run up to the seed. Domains are axis
aligned rectangles given as polygons, the interface is a graph over x, and
every command reads its own block; unknown keys are tolerated so one file
can drive several commands.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .estimator import TheoryConstants
from .fem import Coefficients
from .geometry import Ball, DomainSpec, InterfaceChart, InterfaceGraph, Rect, ThreeRegionParams, chart_at

__all__ = [
    "load_config",
    "config_hash",
    "parse_rect",
    "build_spec",
    "build_coeffs",
    "build_constants",
    "build_three_region",
    "build_chart",
    "parse_region",
]


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _require(cfg: dict, key: str, where: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{where} is missing required key {key!r}")
    return cfg[key]


def parse_rect(polygon) -> Rect:
    """Axis-aligned rectangle from a polygon vertex list (closed or open)."""
    try:
        pts = np.asarray(polygon, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("omega.polygon must be a list of [x, y] pairs") from None
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigError("omega.polygon must be a list of [x, y] pairs")
    if pts.shape[0] == 5 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    if pts.shape[0] != 4:
        raise ConfigError("omega.polygon must have 4 vertices (optionally closed)")
    xs = np.unique(pts[:, 0])
    ys = np.unique(pts[:, 1])
    if xs.size != 2 or ys.size != 2:
        raise ConfigError("omega.polygon must be an axis-aligned rectangle")
    corners = {(x, y) for x in xs for y in ys}
    if {(p[0], p[1]) for p in pts} != corners:
        raise ConfigError("omega.polygon vertices must be the rectangle corners")
    return Rect(float(xs[0]), float(xs[1]), float(ys[0]), float(ys[1]))


def _build_interface(block: dict) -> InterfaceGraph:
    kind = _require(block, "kind", "interface")
    params = block.get("params", {})
    if kind == "flat":
        return InterfaceGraph.flat(float(_require(params, "level", "interface.params")))
    if kind == "parabola":
        return InterfaceGraph.parabola(
            float(_require(params, "level", "interface.params")),
            float(_require(params, "curvature", "interface.params")),
            float(params.get("x_center", 0.5)),
        )
    if kind == "spline":
        xs = params.get("xs")
        ys = params.get("ys")
        if xs is None or ys is None:
            raise ConfigError("spline interface needs params.xs and params.ys")
        return InterfaceGraph.spline(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    raise ConfigError(f"unknown interface kind {kind!r}")


def build_spec(cfg: dict) -> DomainSpec:
    omega = parse_rect(_require(_require(cfg, "omega"), "polygon", "omega"))
    interface = _build_interface(_require(cfg, "interface"))
    h = float(_require(cfg, "h"))
    d_block = cfg.get("d_rect")
    d_rect = parse_rect(d_block["polygon"]) if d_block else None
    try:
        return DomainSpec(omega=omega, interface=interface, h=h, d_rect=d_rect)
    except Exception as exc:
        raise ConfigError(f"invalid domain: {exc}") from None


def build_coeffs(cfg: dict) -> Coefficients:
    block = cfg.get("coefficients", {})
    a_plus = block.get("a_plus", 1.0)
    a_minus = block.get("a_minus", 1.0)
    b = block.get("b")
    if b is not None:
        bvec = np.asarray(b, dtype=float)
        if bvec.shape != (2,):
            raise ConfigError("coefficients.b must be null or a [bx, by] pair")

        def b_fn(pts, _v=bvec):
            return np.broadcast_to(_v, (np.atleast_2d(pts).shape[0], 2))

    else:
        b_fn = None
    q = float(block.get("q", 0.0))
    try:
        return Coefficients(a_plus=a_plus, a_minus=a_minus, b=b_fn, q=q)
    except Exception as exc:
        raise ConfigError(f"invalid coefficients: {exc}") from None


def build_constants(cfg: dict) -> TheoryConstants:
    block = cfg.get("constants", {})
    try:
        return TheoryConstants(
            C1=float(block.get("C1", 1.0)),
            C2=float(block.get("C2", 1.0)),
            tau=float(block.get("tau", 0.5)),
            h0=float(block.get("h0", 0.05)),
        )
    except Exception as exc:
        raise ConfigError(f"invalid constants: {exc}") from None


def build_three_region(cfg: dict) -> ThreeRegionParams:
    block = _require(cfg, "three_region")
    try:
        return ThreeRegionParams(
            R1=float(_require(block, "R1", "three_region")),
            R2=float(_require(block, "R2", "three_region")),
            alpha_plus=float(block.get("alpha_plus", 1.0)),
            alpha_minus=float(block.get("alpha_minus", 1.0)),
            beta=float(block.get("beta", 1.0)),
            delta=float(block.get("delta", 0.5)),
            tau0=float(block.get("tau0", 1.0)),
            carleman_C=float(block.get("C", 1.0)),
            R_cap=float(block.get("R_cap", 1.0)),
            theta=float(block.get("theta", 1.0)),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid three_region block: {exc}") from None


def build_chart(cfg: dict, spec: DomainSpec) -> InterfaceChart:
    block = cfg.get("chart", {})
    x_center = float(block.get("x_center", 0.5 * (spec.omega.x0 + spec.omega.x1)))
    r0 = float(cfg.get("r0", 0.3))
    K0 = float(cfg.get("K0", 1.0))
    try:
        return chart_at(spec.interface, x_center, r0, K0)
    except Exception as exc:
        raise ConfigError(f"cannot build interface chart: {exc}") from None


def parse_region(block: dict):
    kind = _require(block, "kind", "region")
    if kind == "ball":
        return Ball(np.asarray(_require(block, "center", "region"), dtype=float), float(_require(block, "radius", "region")))
    if kind == "rect":
        return parse_rect(_require(block, "polygon", "region"))
    raise ConfigError(f"unknown region kind {kind!r}")
