"""Unital completely positive maps on a matrix algebra, Heisenberg picture.

A map is ``P(T) = sum_k K_k^* T K_k``.  Superoperators act on row-major
vectorisations, so ``vec(A T B) = kron(A, B.T) vec(T)``.  The Choi matrix is
``C = sum_ab E_ab (x) P(E_ab)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .algebra import MatrixAlgebra, contains, from_generators, full_algebra, same_span
from .errors import (DoesNotPreserveAlgebra, InvalidComposition, InvalidMatrix, NotPSD,
                     NotUnital, SemigroupDefect)
from .numerics import as_matrix, dag, haar_isometry, haar_unitary, hermitian_part, opnorm, rank_tol

UNITAL_TOL = 1e-8
ENDO_TOL = 1e-9
SEMIGROUP_TOL = 1e-9

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class CpMap:
    domain: MatrixAlgebra
    kraus: np.ndarray  # shape (r, d, d)
    choi: np.ndarray
    superop: np.ndarray

    @property
    def d(self) -> int:
        return self.domain.ambient_dim

    def __call__(self, T: np.ndarray) -> np.ndarray:
        d = self.d
        return (self.superop @ np.asarray(T, dtype=complex).reshape(-1)).reshape(d, d)

    def apply_many(self, Ts: np.ndarray) -> np.ndarray:
        """Apply to a stack of matrices of shape (..., d, d)."""
        Ts = np.asarray(Ts, dtype=complex)
        flat = Ts.reshape(Ts.shape[:-2] + (-1,))
        return (flat @ self.superop.T).reshape(Ts.shape)

    @property
    def choi_rank(self) -> int:
        w = np.linalg.eigvalsh(hermitian_part(self.choi))
        top = max(float(np.max(np.abs(w))), 1.0)
        return int(np.sum(w > rank_tol() * top))


def superop_from_kraus(ops: np.ndarray) -> np.ndarray:
    d = ops.shape[-1]
    S = np.zeros((d * d, d * d), dtype=complex)
    for K in ops:
        S += np.kron(dag(K), K.T)
    return S


def choi_from_superop(S: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(S.shape[0])))
    # C[(a,c),(b,d)] = P(E_ab)[c,d] = S[(c,d),(a,b)]
    return S.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d)


def superop_from_choi(C: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(C.shape[0])))
    return C.reshape(d, d, d, d).transpose(1, 3, 0, 2).reshape(d * d, d * d)


def kraus_from_choi(C: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """Kraus operators from a PSD Choi matrix; raises NotPSD otherwise."""
    tol = rank_tol() if tol is None else tol
    d = int(round(np.sqrt(C.shape[0])))
    w, U = np.linalg.eigh(hermitian_part(C))
    scale = max(float(np.max(np.abs(w))), 1.0)
    # the Choi matrix of a unital map has trace d, so an absolute cutoff is used
    if w[0] < -tol:
        raise NotPSD(f"Choi matrix has eigenvalue {w[0]:.3e}", defect=float(-w[0]))
    keep = np.nonzero(w > tol * scale)[0][::-1]
    ops = [np.conj(np.sqrt(w[k]) * U[:, k]).reshape(d, d) for k in keep]
    if not ops:
        return np.zeros((0, d, d), dtype=complex)
    return np.stack(ops)


def _check_unital(S: np.ndarray, d: int, tol: float = UNITAL_TOL) -> float:
    defect = opnorm((S @ np.eye(d, dtype=complex).reshape(-1)).reshape(d, d) - np.eye(d))
    if defect > tol:
        raise NotUnital(f"P(I) differs from I by {defect:.3e}", defect=defect)
    return defect


def _check_preserves(M: MatrixAlgebra, P: CpMap) -> None:
    for k, B in enumerate(M.basis):
        ok, res = contains(M, P(B))
        if not ok:
            raise DoesNotPreserveAlgebra(
                f"P maps basis element {k} outside the algebra (residual {res:.3e})", defect=res)


def _build(M: MatrixAlgebra, ops: np.ndarray, check: bool = True) -> CpMap:
    S = superop_from_kraus(ops)
    P = CpMap(M, ops, choi_from_superop(S), S)
    if check:
        _check_unital(S, M.ambient_dim)
        _check_preserves(M, P)
    return P


def from_kraus(M: MatrixAlgebra, ops: Sequence[np.ndarray]) -> CpMap:
    d = M.ambient_dim
    mats = []
    for k, K in enumerate(ops):
        K = as_matrix(K, f"Kraus operator {k}")
        if K.shape != (d, d):
            raise InvalidMatrix(f"Kraus operator {k} has shape {K.shape}, expected {(d, d)}")
        mats.append(K)
    arr = np.stack(mats) if mats else np.zeros((0, d, d), dtype=complex)
    return _build(M, arr)


def from_choi(M: MatrixAlgebra, C, tol: Optional[float] = None) -> CpMap:
    d = M.ambient_dim
    C = as_matrix(C, "Choi matrix")
    if C.shape != (d * d, d * d):
        raise InvalidMatrix(f"Choi matrix has shape {C.shape}, expected {(d * d, d * d)}")
    return _build(M, kraus_from_choi(C, tol))


def from_superop(M: MatrixAlgebra, S: np.ndarray, tol: Optional[float] = None) -> CpMap:
    return from_choi(M, choi_from_superop(np.asarray(S, dtype=complex)), tol)


def compose(P: CpMap, Q: CpMap) -> CpMap:
    """The map T -> P(Q(T))."""
    if P.d != Q.d or not (P.domain is Q.domain or same_span(P.domain, Q.domain)):
        raise InvalidComposition("maps act on different algebras")
    ops = np.einsum("jab,ibc->ijac", Q.kraus, P.kraus).reshape(-1, P.d, P.d)
    S = P.superop @ Q.superop
    # drop the redundant Kraus operators the product produces
    ops = kraus_from_choi(choi_from_superop(S)) if ops.shape[0] > P.d * P.d else ops
    return CpMap(P.domain, ops, choi_from_superop(S), S)


def power(P: CpMap, n: int) -> CpMap:
    R = identity_map(P.domain)
    for _ in range(n):
        R = compose(P, R)
    return R


def endomorphism_defect(P: CpMap) -> float:
    B = P.domain.basis
    PB = P.apply_many(B)
    prods = np.einsum("iab,jbc->ijac", B, B)
    lhs = P.apply_many(prods)
    rhs = np.einsum("iab,jbc->ijac", PB, PB)
    diff = (lhs - rhs).reshape(-1, P.d, P.d)
    return max((opnorm(x) for x in diff), default=0.0)


def is_endomorphism(P: CpMap, tol: float = ENDO_TOL) -> bool:
    return endomorphism_defect(P) <= tol


def superop_distance(P: CpMap, Q: CpMap) -> float:
    return opnorm(P.superop - Q.superop)


@dataclass(frozen=True, eq=False)
class SemigroupSpec:
    generator: CpMap
    horizon: int
    maps: List[CpMap]

    def __getitem__(self, t: int) -> CpMap:
        return self.maps[t]


def semigroup_defect(maps: Sequence[CpMap]) -> float:
    N = len(maps) - 1
    worst = opnorm(maps[0].superop - np.eye(maps[0].superop.shape[0]))
    for t in range(N + 1):
        for s in range(N + 1 - t):
            worst = max(worst, opnorm(maps[t + s].superop - maps[t].superop @ maps[s].superop))
    return worst


def semigroup(P: CpMap, N: int) -> SemigroupSpec:
    if N < 1:
        raise ValueError("horizon must be at least 1")
    maps = [identity_map(P.domain)]
    for _ in range(N):
        maps.append(compose(P, maps[-1]))
    defect = semigroup_defect(maps)
    if defect > SEMIGROUP_TOL:
        raise SemigroupDefect(f"semigroup law fails by {defect:.3e}", defect=defect)
    return SemigroupSpec(P, N, maps)


# ---------------------------------------------------------------- constructors

def identity_map(M: MatrixAlgebra) -> CpMap:
    return _build(M, np.eye(M.ambient_dim, dtype=complex)[None], check=False)


def unitary_conjugation(U: np.ndarray, M: Optional[MatrixAlgebra] = None) -> CpMap:
    """Ad_U: T -> U^* T U."""
    U = as_matrix(U, "U")
    M = full_algebra(U.shape[0]) if M is None else M
    return from_kraus(M, [U])


def weyl_operators(d: int) -> List[np.ndarray]:
    """Clock-and-shift operators X^a Z^b, a, b in 0..d-1 (Paulis up to phase for d = 2)."""
    if d == 2:
        return [PAULI[k] for k in "IXYZ"]
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            for a in range(d) for b in range(d)]


def depolarizing(p: float, d: int = 2, M: Optional[MatrixAlgebra] = None) -> CpMap:
    """T -> (1 - p) T + p tr(T)/d I."""
    if not 0.0 <= p <= 1.0 + 1.0 / (d * d - 1):
        raise ValueError(f"depolarizing parameter out of range: {p}")
    W = weyl_operators(d)
    ops = [np.sqrt(1 - p + p / d ** 2) * W[0]] + [np.sqrt(p) / d * w for w in W[1:]]
    return from_kraus(full_algebra(d) if M is None else M, ops)


def random_channel(d: int, rank: int, rng: np.random.Generator, M: Optional[MatrixAlgebra] = None) -> CpMap:
    """P(T) = V^*(T (x) I_r)V for a Haar isometry V: C^d -> C^d (x) C^r."""
    V = haar_isometry(d * rank, d, rng)
    ops = V.reshape(d, rank, d).transpose(1, 0, 2)
    return from_kraus(full_algebra(d) if M is None else M, list(ops))


def mixed_unitary(weights: Sequence[float], unitaries: Sequence[np.ndarray],
                  M: Optional[MatrixAlgebra] = None) -> CpMap:
    w = np.asarray(weights, dtype=float)
    ops = [np.sqrt(wk) * np.asarray(U, dtype=complex) for wk, U in zip(w, unitaries)]
    return from_kraus(full_algebra(ops[0].shape[0]) if M is None else M, ops)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    return haar_unitary(d, rng)


def amplify(P: CpMap, m: int) -> CpMap:
    """P (x) id on B(C^d) (x) I_m, as a map on the algebra B(C^d) (x) I_m of M_{dm}."""
    d = P.d
    gens = [np.kron(B, np.eye(m)) for B in full_algebra(d).basis]
    M = from_generators(d * m, gens)
    return from_kraus(M, [np.kron(K, np.eye(m)) for K in P.kraus])


def semigroup_from_maps(maps: Sequence[CpMap], tol: float = SEMIGROUP_TOL) -> SemigroupSpec:
    """Validate an explicit family maps[0..N] against the semigroup law."""
    maps = list(maps)
    if len(maps) < 2:
        raise ValueError("need maps for t = 0..N with N >= 1")
    defect = semigroup_defect(maps)
    if defect > tol:
        raise SemigroupDefect(f"family violates P_(t+s) = P_t P_s by {defect:.3e}", defect=defect)
    return SemigroupSpec(maps[1], len(maps) - 1, maps)
