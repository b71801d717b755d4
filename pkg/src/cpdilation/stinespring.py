"""Minimal Stinespring dilation built as a Gram quotient of M (x) H.

The same construction, applied to a space K that already carries a
representation of M, produces the iterated spaces M (x)_P K used by the
dilation and product-system modules; :class:`TensorLayer` is that building
block.

Raw coordinates of M (x) K are indexed by (i, x) with i running over the HS
basis of M and x over an orthonormal basis of K, and the pre-inner product is
``<B_i (x) e_x, B_j (x) e_y> = <e_x, pi_K(P(B_i^* B_j)) e_y>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .algebra import MatrixAlgebra, contains
from .cpmap import CpMap
from .errors import NotInAlgebra, NotMinimal, RepresentationDefect
from .numerics import GramQuotient, dag, gram_quotient, max_opnorm, opnorm, range_basis

STINESPRING_TOL = 1e-10
REP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TensorLayer:
    """The space M (x)_P K together with the left representation of M on it."""

    cpmap: CpMap
    inner_dim: int
    inner_rep: np.ndarray  # (k, n, n): representation of M on K
    quotient: GramQuotient
    rep: np.ndarray  # (k, D, D): representation of M on M (x)_P K

    @property
    def algebra(self) -> MatrixAlgebra:
        return self.cpmap.domain

    @property
    def dim(self) -> int:
        return self.quotient.dim

    def pi(self, T: np.ndarray) -> np.ndarray:
        return np.tensordot(self.algebra.coefficients(T), self.rep, axes=(0, 0))

    def embed_raw(self, coeffs: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Quotient image of sum_i coeffs[i] B_i (x) xi (xi may be a matrix of columns)."""
        xi = np.asarray(xi, dtype=complex)
        col = xi.ndim == 1
        xi = xi[:, None] if col else xi
        raw = np.kron(np.asarray(coeffs, dtype=complex)[:, None], xi)
        out = self.quotient.embed @ raw
        return out[:, 0] if col else out

    def insert(self, T: np.ndarray) -> np.ndarray:
        """Matrix of xi -> T (x) xi from K into the layer."""
        return self.embed_raw(self.algebra.coefficients(T), np.eye(self.inner_dim))

    def insert_identity(self) -> np.ndarray:
        return self.embed_raw(self.algebra.identity_coefficients, np.eye(self.inner_dim))

    def amplify(self, Y: np.ndarray, source: "TensorLayer") -> np.ndarray:
        """I (x) Y from ``source`` (M (x) K1) to this layer (M (x) K2).

        Y: K1 -> K2 must intertwine the representations of M on K1 and K2.
        """
        k = self.algebra.dim
        raw = np.kron(np.eye(k), Y)
        return self.quotient.embed @ raw @ source.quotient.lift


def _gram(P: CpMap, inner_rep: np.ndarray) -> np.ndarray:
    M = P.domain
    B = M.basis
    k, n = B.shape[0], inner_rep.shape[1]
    prods = np.einsum("iba,jbc->ijac", np.conj(B), B)  # B_i^* B_j
    coeffs = M.coefficients_many(P.apply_many(prods))  # (k, k, k)
    G = np.einsum("ijl,lxy->ixjy", coeffs, inner_rep)
    return G.reshape(k * n, k * n)


def tensor_layer(P: CpMap, inner_rep: np.ndarray, tol: Optional[float] = None) -> TensorLayer:
    """Build M (x)_P K for K carrying the representation ``inner_rep`` of M."""
    M = P.domain
    inner_rep = np.asarray(inner_rep, dtype=complex)
    n = inner_rep.shape[1]
    G = _gram(P, inner_rep)
    gq = gram_quotient(G, tol, scale=1.0)
    eye = np.eye(n)
    rep = np.stack([gq.embed @ np.kron(M.left_multiplication(B), eye) @ gq.lift for B in M.basis])
    return TensorLayer(P, n, inner_rep, gq, rep)


@dataclass(frozen=True, eq=False)
class StinespringTriple:
    source: CpMap
    dil_dim: int
    quotient: np.ndarray  # Q with Q G Q^H = I; raw -> completion is Q G
    pi_basis: np.ndarray  # (k, D, D)
    W: np.ndarray  # (D, d)
    layer: TensorLayer

    def pi(self, T: np.ndarray) -> np.ndarray:
        return self.layer.pi(T)

    def compress(self, T: np.ndarray) -> np.ndarray:
        return dag(self.W) @ self.pi(T) @ self.W


def representation_defect(alg: MatrixAlgebra, images: np.ndarray) -> float:
    """Max defect of the *-homomorphism property on basis pairs, plus unitality."""
    B = alg.basis
    k = alg.dim
    prods = np.einsum("iab,jbc->ijac", B, B).reshape(-1, alg.ambient_dim, alg.ambient_dim)
    pc = alg.coefficients_many(prods)  # (k*k, k)
    target = np.tensordot(pc, images, axes=(1, 0)).reshape(k, k, *images.shape[1:])
    actual = np.matmul(images[:, None], images[None, :])
    worst = max_opnorm(actual - target)
    adj = alg.coefficients_many(dag(B))
    adj_img = np.tensordot(adj, images, axes=(1, 0))
    worst = max(worst, max_opnorm(adj_img - dag(images)))
    unit = np.tensordot(alg.identity_coefficients, images, axes=(0, 0))
    worst = max(worst, opnorm(unit - np.eye(images.shape[1])))
    return worst


def build(P: CpMap, tol: Optional[float] = None) -> StinespringTriple:
    """Minimal Stinespring triple (pi_P, M (x)_P H, W_P)."""
    M = P.domain
    layer = tensor_layer(P, M.basis, tol)
    rdef = representation_defect(M, layer.rep)
    if rdef > REP_TOL:
        raise RepresentationDefect(f"pi_P is not a unital *-representation (defect {rdef:.3e})",
                                   defect=rdef)
    W = layer.insert_identity()
    triple = StinespringTriple(P, layer.dim, layer.quotient.Q, layer.rep, W, layer)
    iso = isometry_defect(triple)
    if iso > STINESPRING_TOL:
        raise RepresentationDefect(f"W_P is not an isometry (defect {iso:.3e})", defect=iso)
    sd = stinespring_defect(triple)
    if sd > STINESPRING_TOL:
        raise RepresentationDefect(f"P(T) != W* pi(T) W (defect {sd:.3e})", defect=sd)
    return triple


def isometry_defect(triple: StinespringTriple) -> float:
    d = triple.W.shape[1]
    return opnorm(dag(triple.W) @ triple.W - np.eye(d))


def stinespring_defect(triple: StinespringTriple) -> float:
    P = triple.source
    W = triple.W
    comp = np.einsum("ax,kab,by->kxy", np.conj(W), triple.pi_basis, W)
    return max_opnorm(comp - P.apply_many(P.domain.basis))


def w_adjoint(triple: StinespringTriple, X: np.ndarray, h: np.ndarray) -> np.ndarray:
    """W_P^*(X (x) h), checked against P(X) h."""
    M = triple.source.domain
    ok, res = contains(M, X)
    if not ok:
        raise NotInAlgebra(f"operator is not in the algebra (residual {res:.3e})", defect=res)
    h = np.asarray(h, dtype=complex)
    vec = triple.layer.embed_raw(M.coefficients(X), h)
    out = dag(triple.W) @ vec
    expected = triple.source(X) @ h
    defect = float(np.linalg.norm(out - expected))
    if defect > STINESPRING_TOL * max(1.0, opnorm(X) * np.linalg.norm(h)):
        raise RepresentationDefect(f"W_P^*(X (x) h) != P(X)h (defect {defect:.3e})", defect=defect)
    return out


def cyclic_closure(generators: Sequence[np.ndarray], start: np.ndarray,
                   max_rounds: Optional[int] = None) -> Dict[str, int]:
    """Dimension of the smallest subspace containing range(start) invariant under generators."""
    V = range_basis(start, scale=1.0).basis
    dims = [V.shape[1]]
    total = start.shape[0]
    rounds = 0
    limit = total + 1 if max_rounds is None else max_rounds
    while rounds < limit:
        cand = np.concatenate([V] + [g @ V for g in generators], axis=1)
        nxt = range_basis(cand, scale=1.0).basis
        rounds += 1
        if nxt.shape[1] == V.shape[1]:
            break
        V = nxt
        dims.append(V.shape[1])
    return {"dim": V.shape[1], "rounds": rounds, "history": dims, "basis": V}


def minimality_certificate(triple: StinespringTriple) -> Dict[str, object]:
    closure = cyclic_closure(list(triple.pi_basis), triple.W)
    report = {"dil_dim": triple.dil_dim, "closure_dim": closure["dim"],
              "rounds": closure["rounds"], "history": closure["history"],
              "minimal": closure["dim"] == triple.dil_dim}
    if not report["minimal"]:
        raise NotMinimal(f"cyclic subspace has dimension {closure['dim']} < {triple.dil_dim}",
                         defect=float(triple.dil_dim - closure["dim"]))
    return report


def compressed_moments(triple: StinespringTriple, ops: Sequence[np.ndarray], length: int = 3) -> np.ndarray:
    """All W^* pi(T_1) ... pi(T_m) W for words of length 1..length over ``ops``."""
    imgs = [triple.pi(T) for T in ops]
    out = []
    frontier = [triple.W]
    for _ in range(length):
        frontier = [g @ v for g in imgs for v in frontier]
        out.extend(dag(triple.W) @ v for v in frontier)
    return np.stack(out)


def report(triple: StinespringTriple) -> Dict[str, object]:
    try:
        minimal = minimality_certificate(triple)["minimal"]
    except NotMinimal:
        minimal = False
    return {"dil_dim": int(triple.dil_dim), "isometry_defect": isometry_defect(triple),
            "stinespring_defect": stinespring_defect(triple), "minimal": bool(minimal)}
