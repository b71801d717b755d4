"""Concrete unital *-subalgebras of B(C^d) and their commutants.

An algebra is stored through a Hilbert-Schmidt orthonormal basis, which makes
membership a projection and expansions a single matrix product.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidGenerator, InvalidMatrix, RepresentationDefect
from .numerics import as_matrix, dag, null_space, opnorm, range_basis

MEMBERSHIP_TOL = 1e-9

# fixed seed for the random elements used to split an algebra into blocks;
# the seed only selects a generic element, the output does not depend on it
_STRUCTURE_SEED = 20240611


def _orthonormal_span(mats: Sequence[np.ndarray], d: int, tol: Optional[float] = None) -> np.ndarray:
    if len(mats) == 0:
        return np.zeros((0, d, d), dtype=complex)
    V = np.stack([np.asarray(m, dtype=complex).reshape(-1) for m in mats], axis=1)
    cols = range_basis(V, tol, scale=1.0).basis
    return cols.T.reshape(-1, d, d)


@dataclass(frozen=True, eq=False)
class MatrixAlgebra:
    """Unital *-algebra of d x d matrices with an orthonormal HS basis."""

    ambient_dim: int
    basis: np.ndarray  # shape (dim, d, d)
    contains_identity: bool = True

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def _flat(self) -> np.ndarray:
        return self.basis.reshape(self.dim, -1)

    def coefficients(self, X: np.ndarray) -> np.ndarray:
        """HS coefficients of the orthogonal projection of X onto the span."""
        return np.conj(self._flat) @ np.asarray(X, dtype=complex).reshape(-1)

    def coefficients_many(self, Xs: np.ndarray) -> np.ndarray:
        """Coefficients for a stack of matrices, shape (..., dim)."""
        Xs = np.asarray(Xs, dtype=complex)
        flat = Xs.reshape(Xs.shape[:-2] + (-1,))
        return flat @ np.conj(self._flat).T

    def element(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=complex), self.basis, axes=(0, 0))

    def project(self, X: np.ndarray) -> np.ndarray:
        return self.element(self.coefficients(X))

    def left_multiplication(self, S: np.ndarray) -> np.ndarray:
        """Matrix C with S B_j = sum_i C[i, j] B_i, valid when S lies in the algebra."""
        SB = np.einsum("ab,jbc->jac", np.asarray(S, dtype=complex), self.basis)
        return np.conj(self._flat) @ SB.reshape(self.dim, -1).T

    @cached_property
    def identity_coefficients(self) -> np.ndarray:
        return self.coefficients(np.eye(self.ambient_dim))

    @cached_property
    def structure(self) -> "BlockStructure":
        return block_structure(self)

    def random_element(self, rng: np.random.Generator, hermitian: bool = False) -> np.ndarray:
        c = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        X = self.element(c)
        return 0.5 * (X + dag(X)) if hermitian else X


@dataclass(frozen=True, eq=False)
class Commutant:
    of: MatrixAlgebra
    algebra: MatrixAlgebra


def _validate_square(X, d: int, err=InvalidMatrix, name: str = "matrix") -> np.ndarray:
    try:
        M = as_matrix(X, name)
    except InvalidMatrix as exc:
        raise err(str(exc)) from exc
    if M.shape != (d, d):
        raise err(f"{name} has shape {M.shape}, expected {(d, d)}")
    return M


def from_generators(d: int, gens: Sequence[np.ndarray]) -> MatrixAlgebra:
    """Smallest unital *-algebra containing ``gens``."""
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise InvalidGenerator(f"ambient dimension must be a positive integer, got {d!r}")
    d = int(d)
    mats = [_validate_square(g, d, InvalidGenerator, f"generator {k}") for k, g in enumerate(gens)]
    seed = [np.eye(d, dtype=complex)] + mats + [dag(g) for g in mats]
    basis = _orthonormal_span(seed, d)
    for _ in range(d * d):
        prods = np.einsum("iab,jbc->ijac", basis, basis).reshape(-1, d, d)
        grown = _orthonormal_span(list(basis) + list(prods) + list(dag(basis)), d)
        if grown.shape[0] == basis.shape[0]:
            return MatrixAlgebra(d, basis, True)
        basis = grown
    raise InvalidGenerator(f"generated span did not stabilise within {d * d} rounds")


def from_basis(d: int, mats: Sequence[np.ndarray]) -> MatrixAlgebra:
    """Algebra spanned by ``mats``, which must already be a unital *-algebra."""
    alg = from_generators(d, mats)
    span = _orthonormal_span(list(mats) + [np.eye(d)], d)
    if span.shape[0] != alg.dim:
        raise InvalidGenerator("span is not closed under products and adjoints")
    return alg


def full_algebra(d: int) -> MatrixAlgebra:
    """B(C^d) with the matrix-unit basis E_ab in row-major order."""
    return MatrixAlgebra(d, np.eye(d * d, dtype=complex).reshape(d * d, d, d), True)


def scalar_algebra(d: int) -> MatrixAlgebra:
    return MatrixAlgebra(d, (np.eye(d, dtype=complex) / np.sqrt(d))[None], True)


def diagonal_algebra(d: int) -> MatrixAlgebra:
    basis = np.zeros((d, d, d), dtype=complex)
    for k in range(d):
        basis[k, k, k] = 1.0
    return MatrixAlgebra(d, basis, True)


def block_algebra(sizes: Sequence[int], multiplicities: Optional[Sequence[int]] = None) -> MatrixAlgebra:
    """Direct sum of B(C^n_j) (x) I_m_j, embedded block-diagonally."""
    mults = [1] * len(sizes) if multiplicities is None else list(multiplicities)
    d = sum(n * m for n, m in zip(sizes, mults))
    mats = []
    off = 0
    for n, m in zip(sizes, mults):
        for a in range(n):
            for b in range(n):
                E = np.zeros((d, d), dtype=complex)
                unit = np.zeros((n, n))
                unit[a, b] = 1.0
                E[off:off + n * m, off:off + n * m] = np.kron(unit, np.eye(m)) / np.sqrt(m)
                mats.append(E)
        off += n * m
    return MatrixAlgebra(d, np.stack(mats), True)


def commutator_system(M: MatrixAlgebra) -> np.ndarray:
    """Stacked matrix of X -> B X - X B on row-major vec(X), one block per basis B."""
    d = M.ambient_dim
    eye = np.eye(d)
    return np.concatenate([np.kron(B, eye) - np.kron(eye, B.T) for B in M.basis], axis=0)


def commutant(M: MatrixAlgebra) -> Commutant:
    d = M.ambient_dim
    ns = null_space(commutator_system(M), scale=1.0)
    basis = ns.basis.T.reshape(-1, d, d)
    return Commutant(M, MatrixAlgebra(d, basis, True))


def contains(M: MatrixAlgebra, X) -> Tuple[bool, float]:
    """Membership flag and operator-norm residual of the projection."""
    X = _validate_square(X, M.ambient_dim, InvalidMatrix, "X")
    residual = opnorm(X - M.project(X))
    return residual <= MEMBERSHIP_TOL * max(1.0, opnorm(X)), residual


def same_span(A: MatrixAlgebra, B: MatrixAlgebra) -> bool:
    if A.ambient_dim != B.ambient_dim or A.dim != B.dim:
        return False
    return all(contains(A, X)[0] for X in B.basis) and all(contains(B, X)[0] for X in A.basis)


def span_dimension(mats: Sequence[np.ndarray], tol: Optional[float] = None) -> int:
    if len(mats) == 0:
        return 0
    V = np.stack([np.asarray(m, dtype=complex).reshape(-1) for m in mats], axis=1)
    return range_basis(V, tol, scale=1.0).rank


def center(M: MatrixAlgebra) -> MatrixAlgebra:
    """Z(M) = M intersected with M'."""
    d, k = M.ambient_dim, M.dim
    # X = sum c_i B_i commuting with every B_j
    comm = np.einsum("iab,jbc->jiac", M.basis, M.basis) - np.einsum("jab,ibc->jiac", M.basis, M.basis)
    system = comm.transpose(0, 2, 3, 1).reshape(-1, k)
    coeffs = null_space(system, scale=1.0).basis
    mats = [M.element(c) for c in coeffs.T]
    return MatrixAlgebra(d, _orthonormal_span(mats, d), True)


def _cluster(values: np.ndarray, gap: float) -> List[np.ndarray]:
    order = np.argsort(values)
    groups, current = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if values[b] - values[a] > gap:
            groups.append(np.array(current))
            current = []
        current.append(b)
    groups.append(np.array(current))
    return groups


def _spectral_projections(A: np.ndarray, support: np.ndarray) -> List[np.ndarray]:
    """Spectral projections of the Hermitian A compressed to range(support)."""
    F = range_basis(support).basis
    w, U = np.linalg.eigh(dag(F) @ A @ F)
    spread = max(1.0, float(np.max(np.abs(w))))
    out = []
    for g in _cluster(w, 1e-6 * spread):
        V = F @ U[:, g]
        out.append(V @ dag(V))
    return out


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """Matrix units e[j][p][q] of an algebra isomorphic to a sum of full matrix blocks."""

    algebra: MatrixAlgebra
    units: List[List[List[np.ndarray]]]

    @property
    def block_sizes(self) -> List[int]:
        return [len(u) for u in self.units]

    @property
    def multiplicities(self) -> List[int]:
        return [int(round(np.trace(u[0][0]).real)) for u in self.units]


def block_structure(M: MatrixAlgebra) -> BlockStructure:
    """Compute a system of matrix units for M via generic central and block elements."""
    rng = np.random.default_rng(_STRUCTURE_SEED)
    Z = center(M)
    z = Z.random_element(rng, hermitian=True)
    units = []
    for p in _spectral_projections(z, np.eye(M.ambient_dim)):
        a = M.random_element(rng, hermitian=True)
        minimal = _spectral_projections(p @ a @ p, p)
        e11 = minimal[0]
        col = [e11]
        for epp in minimal[1:]:
            x = M.random_element(rng)
            v = epp @ x @ e11
            c = np.trace(dag(v) @ v).real / np.trace(e11).real
            col.append(v / np.sqrt(c))
        n = len(col)
        block = [[col[a_] @ dag(col[b_]) for b_ in range(n)] for a_ in range(n)]
        units.append(block)
    s = BlockStructure(M, units)
    total = sum(u[p][p] for u in units for p in range(len(u)))
    if opnorm(total - np.eye(M.ambient_dim)) > 1e-8:
        raise RepresentationDefect("matrix units do not sum to the identity")
    return s


def representation_commutant_element(
    structure: BlockStructure, rep, blocks: Sequence[np.ndarray],
    corners: Optional[List[np.ndarray]] = None,
) -> np.ndarray:
    """Element of rep(A)' assembled from one operator per block.

    ``rep`` maps a d x d element of A to its image; ``blocks[j]`` is an operator
    on the range of rep(e^j_11), given in the orthonormal coordinates returned by
    :func:`representation_corners`.
    """
    corners = representation_corners(structure, rep) if corners is None else corners
    out = None
    for j, (units, F) in enumerate(zip(structure.units, corners)):
        Y = F @ blocks[j] @ dag(F)
        for p in range(len(units)):
            term = rep(units[p][0]) @ Y @ rep(units[0][p])
            out = term if out is None else out + term
    return out


def representation_corners(structure: BlockStructure, rep) -> List[np.ndarray]:
    """Orthonormal bases of range(rep(e^j_11)) for each block j."""
    return [range_basis(rep(units[0][0])).basis for units in structure.units]


def random_representation_commutant(
    structure: BlockStructure, rep, rng: np.random.Generator, hermitian: bool = False,
    corners: Optional[List[np.ndarray]] = None,
) -> np.ndarray:
    corners = representation_corners(structure, rep) if corners is None else corners
    blocks = []
    for F in corners:
        m = F.shape[1]
        Y = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        blocks.append(0.5 * (Y + dag(Y)) if hermitian else Y)
    return representation_commutant_element(structure, rep, blocks, corners)


def representation_commutant_dim(structure: BlockStructure, rep) -> int:
    return sum(F.shape[1] ** 2 for F in representation_corners(structure, rep))
