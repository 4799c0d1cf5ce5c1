"""JSON encodings of matrices, tuples, frames, points, witnesses and models.

Complex scalars are written as ``[re, im]`` pairs.  Matrices are row-major::

    {"rows": N, "cols": M, "entries": [[re, im], ...]}

A tuple is ``{"n": n, "dim": N, "matrices": [matrix, ...]}`` and a frame is a
matrix with the extra keys ``"ambient_dim"`` and ``"rank"``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch, InputError
from .opcore import Frame, OperatorTuple, as_point


def _pair(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _scalar(p) -> complex:
    if isinstance(p, (int, float)):
        return complex(p)
    if not isinstance(p, (list, tuple)) or len(p) != 2:
        raise InputError(f"complex scalar must be [re, im], got {p!r}")
    return complex(float(p[0]), float(p[1]))


def vector_to_json(v) -> list[list[float]]:
    return [_pair(z) for z in np.asarray(v).ravel()]


def vector_from_json(obj) -> np.ndarray:
    if not isinstance(obj, list):
        raise InputError("vector must be a list of [re, im] pairs")
    return np.array([_scalar(p) for p in obj], dtype=np.complex128)


def matrix_to_json(m) -> dict[str, Any]:
    m = np.asarray(m)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "entries": vector_to_json(m)}


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed matrix object: {exc}") from None
    if rows < 1 or cols < 1:
        raise DimensionMismatch("matrix dimensions must be positive")
    flat = vector_from_json(entries)
    if flat.size != rows * cols:
        raise DimensionMismatch(f"matrix has {flat.size} entries, expected {rows * cols}")
    m = flat.reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise InputError("matrix has non-finite entries")
    return m


def tuple_to_json(t: OperatorTuple) -> dict[str, Any]:
    return {"n": t.n, "dim": t.dim, "matrices": [matrix_to_json(m) for m in t]}


def tuple_from_json(obj) -> OperatorTuple:
    try:
        n, dim, mats = int(obj["n"]), int(obj["dim"]), obj["matrices"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed tuple object: {exc}") from None
    if len(mats) != n:
        raise DimensionMismatch(f"tuple declares n={n} but lists {len(mats)} matrices")
    t = OperatorTuple([matrix_from_json(m) for m in mats])
    if t.dim != dim:
        raise DimensionMismatch(f"tuple declares dim={dim} but matrices are {t.dim}x{t.dim}")
    return t


def frame_to_json(f: Frame) -> dict[str, Any]:
    d = matrix_to_json(f.columns)
    d["ambient_dim"] = f.ambient_dim
    d["rank"] = f.rank
    return d


def frame_from_json(obj) -> Frame:
    m = matrix_from_json(obj)
    if "ambient_dim" in obj and int(obj["ambient_dim"]) != m.shape[0]:
        raise DimensionMismatch("frame ambient_dim disagrees with its rows")
    if "rank" in obj and int(obj["rank"]) != m.shape[1]:
        raise DimensionMismatch("frame rank disagrees with its cols")
    return Frame(m)


def point_from_json(obj) -> np.ndarray:
    if isinstance(obj, dict) and "coords" in obj:
        obj = obj["coords"]
    return as_point(vector_from_json(obj))


def dump(obj, path: str | Path) -> None:
    """Write deterministic JSON (sorted keys, fixed float repr)."""
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def load(path: str | Path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def reservoir_to_json(res) -> dict[str, Any]:
    return {
        "base": tuple_to_json(res.base) if res.base is not None else None,
        "clusters": [{"value": vector_to_json(c.value), "multiplicity": c.multiplicity} for c in res.clusters],
    }


def reservoir_from_json(obj):
    """Reservoir from explicit clusters, or from ``{"power": {...}}``.

    The power form is ``{"points": [[re, im], ...], "multiplicity": m,
    "horizon": n, "base_matrix": matrix | null}`` and builds the reservoir of
    the power tuple (T, ..., T^n).
    """
    from .ranges import ReservoirModel

    if not isinstance(obj, dict):
        raise InputError("reservoir must be a JSON object")
    try:
        if "power" in obj:
            p = obj["power"]
            base = p.get("base_matrix")
            return ReservoirModel.power(
                vector_from_json(p["points"]),
                p["multiplicity"],
                int(p["horizon"]),
                matrix_from_json(base) if base is not None else None,
            )
        base = obj.get("base")
        clusters = [(vector_from_json(c["value"]), int(c["multiplicity"])) for c in obj.get("clusters", [])]
        return ReservoirModel(clusters, tuple_from_json(base) if base is not None else None)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed reservoir object: {exc}") from None


def model_from_json(obj):
    from .asym import ShiftModel

    return ShiftModel.from_json(obj)
