"""JSON exchange formats for matrices, sample sets, and holonomy samples.

The single matrix schema is ``{"dim": 2n, "rows": [[...], ...]}`` with
row-major 64-bit floats.  Everything the CLI emits can be read back by the
subcommand that consumes that artifact type.
"""

from __future__ import annotations

import json

import numpy as np

from . import acs
from .errors import DimensionMismatch
from .karcher import WeightedSampleSet


def matrix_to_json(mat: np.ndarray) -> dict:
    mat = np.asarray(mat, dtype=float)
    return {"dim": int(mat.shape[0]), "rows": [[float(v) for v in row] for row in mat]}


def matrix_from_json(obj: dict) -> np.ndarray:
    if not isinstance(obj, dict) or "dim" not in obj or "rows" not in obj:
        raise DimensionMismatch('expected a {"dim": ..., "rows": ...} object')
    mat = np.array(obj["rows"], dtype=float)
    d = int(obj["dim"])
    if mat.shape != (d, d):
        raise DimensionMismatch(f"rows have shape {mat.shape}, dim says {d}")
    return mat


def structure_to_json(J: acs.OrthoComplexStructure) -> dict:
    return matrix_to_json(J.mat)


def structure_from_json(obj: dict, tol: float = 1e-8) -> acs.OrthoComplexStructure:
    return acs.validate_j(matrix_from_json(obj), tol=tol)


def sample_set_to_json(s: WeightedSampleSet) -> dict:
    return {"points": [structure_to_json(p) for p in s.points],
            "weights": list(s.weights)}


def sample_set_from_json(obj: dict) -> WeightedSampleSet:
    """Accepts {"points": [matrix...], "weights": [...]} (weights optional)
    or a bare JSON array of matrices with uniform weights."""
    if isinstance(obj, list):
        points = [structure_from_json(m) for m in obj]
        return WeightedSampleSet.uniform(points)
    points = [structure_from_json(m) for m in obj["points"]]
    weights = obj.get("weights")
    if weights is None:
        return WeightedSampleSet.uniform(points)
    return WeightedSampleSet(tuple(points), tuple(float(w) for w in weights))


def holonomy_sample_to_json(sample) -> dict:
    return {"base_point": [float(v) for v in sample.base_point],
            "matrix": matrix_to_json(sample.matrix),
            "ode_steps": int(sample.ode_steps),
            "orthogonality_defect": float(sample.orthogonality_defect),
            "word": list(sample.word),
            "loop": sample.loop.description}


def load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def dump_json(obj, path: str | None = None) -> str:
    """Deterministic serialization: sorted keys, fixed separators."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=1)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
