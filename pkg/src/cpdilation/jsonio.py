"""JSON interchange.

Complex numbers are ``[re, im]`` pairs (plain numbers are read as real),
matrices are lists of rows in row-major order.  A channel is ``{"kraus": [K_1, ...]}``
or ``{"choi": C}``, optionally with ``"algebra": {"d": int, "generators": [...]}``.
An input document is either a channel, ``{"channel": channel}``, or
``{"maps": [channel_0, ..., channel_N]}`` for an explicit discrete family
P_0, ..., P_N (P_0 must be the identity map).
"""
from __future__ import annotations

import json
from typing import Any, Dict, List, Optional

import numpy as np

from .algebra import MatrixAlgebra, from_generators, full_algebra
from .cpmap import CpMap, from_choi, from_kraus
from .errors import InvalidMatrix


def _entry(x: Any) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise InvalidMatrix(f"matrix entries must be numbers or [re, im] pairs, got {x!r}")


def matrix_from_json(rows: Any, name: str = "matrix") -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InvalidMatrix(f"{name} must be a non-empty list of rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidMatrix(f"{name} has rows of different lengths")
    A = np.array([[_entry(x) for x in r] for r in rows], dtype=complex)
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return A


def matrix_to_json(A: np.ndarray) -> List[List[List[float]]]:
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def algebra_from_json(obj: Dict[str, Any]) -> MatrixAlgebra:
    if not isinstance(obj, dict) or "d" not in obj:
        raise InvalidMatrix("algebra must be an object with a 'd' field")
    d = int(obj["d"])
    gens = obj.get("generators")
    if gens is None:
        return full_algebra(d)
    return from_generators(d, [matrix_from_json(g, f"generator {k}") for k, g in enumerate(gens)])


def algebra_to_json(M: MatrixAlgebra) -> Dict[str, Any]:
    return {"d": M.ambient_dim, "generators": [matrix_to_json(B) for B in M.basis]}


def channel_from_json(obj: Dict[str, Any], algebra: Optional[MatrixAlgebra] = None,
                      tol: Optional[float] = None) -> CpMap:
    if not isinstance(obj, dict):
        raise InvalidMatrix("channel must be a JSON object")
    if "algebra" in obj:
        algebra = algebra_from_json(obj["algebra"])
    if "kraus" in obj:
        ops = [matrix_from_json(K, f"Kraus operator {k}") for k, K in enumerate(obj["kraus"])]
        if not ops:
            raise InvalidMatrix("empty Kraus list")
        M = algebra if algebra is not None else full_algebra(ops[0].shape[0])
        return from_kraus(M, ops)
    if "choi" in obj:
        C = matrix_from_json(obj["choi"], "Choi matrix")
        d = int(round(np.sqrt(C.shape[0])))
        if d * d != C.shape[0]:
            raise InvalidMatrix(f"Choi matrix size {C.shape[0]} is not a square number")
        M = algebra if algebra is not None else full_algebra(d)
        return from_choi(M, C, tol)
    raise InvalidMatrix("channel needs a 'kraus' or a 'choi' field")


def channel_to_json(P: CpMap) -> Dict[str, Any]:
    return {"kraus": [matrix_to_json(K) for K in P.kraus], "algebra": algebra_to_json(P.domain)}


def load_document(text: str) -> Dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidMatrix(f"input is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidMatrix("input must be a JSON object")
    return doc
