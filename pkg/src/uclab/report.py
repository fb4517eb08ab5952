"""Deterministic serialization of run outputs.

CSV floats are written with %.17g so a fixed seed reproduces byte-identical
tables; JSON is sorted and carries a schema version. Figures live next to
the tables but are outside the byte contract.
"""

from __future__ import annotations

import json
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import config_hash
from .estimator import CSV_HEADER, InequalityReport

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "fmt",
    "write_rows_csv",
    "write_inequality_csv",
    "write_points_csv",
    "write_field_csv",
    "write_json",
    "write_manifest",
]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_rows_csv(path, header: list[str], rows: list[dict]) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(row.get(k, "")) for k in header))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_inequality_csv(path, reports: list[InequalityReport]) -> Path:
    path = Path(path)
    lines = [CSV_HEADER] + [r.csv_row() for r in reports]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_points_csv(path, centers: np.ndarray) -> Path:
    path = Path(path)
    lines = ["index,x,y"]
    for i, (x, y) in enumerate(np.atleast_2d(centers)):
        lines.append(f"{i},{x:.17g},{y:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_field_csv(path, u: np.ndarray) -> Path:
    path = Path(path)
    lines = ["node_id,value"]
    for i, v in enumerate(np.asarray(u, dtype=float)):
        lines.append(f"{i},{v:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and (obj != obj or obj in (float("inf"), float("-inf"))):
        return repr(obj)
    return obj


def write_json(path, obj: dict) -> Path:
    path = Path(path)
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(_jsonable(obj))
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def write_manifest(out_dir, command: str, cfg: dict, seed: int, threads: int) -> Path:
    """Run provenance without timestamps so reruns stay byte-identical."""
    out_dir = Path(out_dir)
    return write_json(
        out_dir / "manifest.json",
        {
            "command": command,
            "config_sha256": config_hash(cfg),
            "seed": seed,
            "threads": threads,
            "versions": {
                "uclab": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        },
    )
