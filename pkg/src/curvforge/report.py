"""Deterministic JSON reports shared by the pipelines and the CLI."""

from __future__ import annotations

import json
from datetime import datetime, timezone

import numpy as np

SCHEMA_VERSION = 1

# summary statistics attached for every emitted field
_FIELD_STATS = ("min", "max", "mean")


def sanitize(obj):
    """Convert numpy containers and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def field_summary(values):
    values = np.asarray(values, dtype=float)
    return {"min": float(values.min()), "max": float(values.max()),
            "mean": float(values.mean())}


def mesh_summary(mesh, metric):
    return {
        "vertices": int(mesh.vertex_count),
        "triangles": int(mesh.face_count),
        "edges": int(mesh.edge_count),
        "boundary_loops": len(mesh.boundary_loops),
        "euler_characteristic": int(mesh.euler_characteristic()),
        "h_max": float(metric.edge_lengths.max()),
        "h_mean": float(metric.edge_lengths.mean()),
    }


def base_report(command, seed=None):
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "sigma_extension": "expression evaluated at all vertices; "
                           "CSV boundary data zero-extended",
    }


def dump_report(report, path):
    """Write the report as sorted, indented JSON (floats round-trip via
    repr, up to 17 significant digits)."""
    with open(path, "w") as fh:
        json.dump(sanitize(report), fh, indent=2, sort_keys=True,
                  allow_nan=False)
        fh.write("\n")
    return path
