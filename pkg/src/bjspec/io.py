"""JSON model, family and half-line files.

A matrix is a row-major list of rows; each entry is a real number or a
``[re, im]`` pair. Model files hold ``L``, ``N``, ``V`` (``N`` matrices),
``T`` (``N - 1`` matrices, sites 2..N) and optional ``Zhat``, ``Z``.
Family files add ``W`` (perturbation blocks from site 1) and
``interval``. Half-line files hold one period of ``V`` and ``T`` plus a
``limit_point`` declaration.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import BoundaryPair, CouplingFamily, SemiInfiniteModel, validate_model


def _entry(x, where):
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ValidationError(f"{where}: entries must be numbers or [re, im] pairs")


def matrix_from_json(obj, where="matrix") -> np.ndarray:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return np.array([[complex(obj)]])
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ValidationError(f"{where}: expected a non-empty list of rows")
    width = len(obj[0])
    if any(len(r) != width for r in obj):
        raise ValidationError(f"{where}: rows have different lengths")
    return np.array([[_entry(x, where) for x in r] for r in obj], dtype=complex)


def matrix_to_json(M) -> list:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [[[float(x.real), float(x.imag)] for x in row] for row in M]


def _matrices(data, key, count, L, where):
    if key not in data:
        raise ValidationError(f"{where}: missing field {key!r}")
    items = data[key]
    if not isinstance(items, list):
        raise ValidationError(f"{where}: field {key!r} must be a list of matrices")
    out = [matrix_from_json(m, f"{where}: {key}[{k}]") for k, m in enumerate(items)]
    if count is not None and len(out) != count:
        raise ValidationError(f"{where}: field {key!r} needs {count} matrices, got {len(out)}")
    for k, m in enumerate(out):
        if m.shape != (L, L):
            raise ValidationError(f"{where}: {key}[{k}] has shape {m.shape}, expected {(L, L)}")
    return out


def _int_field(data, key, where):
    v = data.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ValidationError(f"{where}: field {key!r} must be a positive integer")
    return v


def read_json(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {p}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{p}: top level must be an object")
    return data


def model_from_dict(data, where="model"):
    """``(BlockJacobiModel, BoundaryPair)``; missing boundaries are Dirichlet."""
    L = _int_field(data, "L", where)
    N = _int_field(data, "N", where)
    V = _matrices(data, "V", N, L, where)
    T = _matrices(data, "T", N - 1, L, where) if N > 1 else []
    model = validate_model(np.array(V), np.array(T).reshape(N - 1, L, L), L=L, N=N)
    bc = {}
    for key in ("Zhat", "Z"):
        m = data.get(key)
        bc[key] = np.zeros((L, L)) if m is None else matrix_from_json(m, f"{where}: {key}")
        if bc[key].shape != (L, L):
            raise ValidationError(f"{where}: {key} has shape {bc[key].shape}, expected {(L, L)}")
    return model, BoundaryPair(bc["Zhat"], bc["Z"])


def model_to_dict(model, bc=None) -> dict:
    out = {"L": model.L, "N": model.N,
           "V": [matrix_to_json(v) for v in model.V],
           "T": [matrix_to_json(t) for t in model.T]}
    if bc is not None:
        out["Zhat"] = matrix_to_json(bc.Zhat)
        out["Z"] = matrix_to_json(bc.Z)
    return out


def load_model(path):
    return model_from_dict(read_json(path), str(path))


def load_family(path) -> CouplingFamily:
    data = read_json(path)
    where = str(path)
    model, _ = model_from_dict(data, where)
    W = _matrices(data, "W", None, model.L, where)
    if not W:
        raise ValidationError(f"{where}: field 'W' must hold at least one matrix")
    I = data.get("interval")
    if not (isinstance(I, list) and len(I) == 2 and all(isinstance(x, (int, float)) for x in I)):
        raise ValidationError(f"{where}: field 'interval' must be [mu0, mu1]")
    return CouplingFamily(model, np.array(W), tuple(I))


def load_halfline(path) -> SemiInfiniteModel:
    """Periodic half-line: ``V`` and ``T`` list one period each."""
    data = read_json(path)
    where = str(path)
    L = _int_field(data, "L", where)
    V = _matrices(data, "V", None, L, where)
    if not V:
        raise ValidationError(f"{where}: field 'V' must hold at least one matrix")
    T = _matrices(data, "T", None, L, where) if "T" in data else []
    validate_model(np.array(V), np.array([T[k % len(T)] for k in range(len(V) - 1)]
                                         if T else np.broadcast_to(np.eye(L), (len(V) - 1, L, L))),
                   L=L, N=len(V))
    lp = data.get("limit_point", True)
    if not isinstance(lp, bool):
        raise ValidationError(f"{where}: field 'limit_point' must be true or false")
    return SemiInfiniteModel.periodic(V, T or None, limit_point=lp)


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"
