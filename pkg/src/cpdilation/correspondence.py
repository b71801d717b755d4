"""Correspondences over the commutant realised as concrete operator spaces.

A :class:`Correspondence` is a space of operators X: H -> K intertwining a
representation of M on K with the identity representation on H.  Its
M'-valued inner product is ``<X, Y> = X^* Y``, the right action is
composition ``X R`` and the left action is ``phi(R) X`` for a representation
``phi`` of M' on K.  Bases are orthonormal for the Hilbert-Schmidt pairing
``tr(X^* Y)``; module adjoints coincide with HS adjoints, so module maps are
handled as ordinary matrices in these bases.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .algebra import MatrixAlgebra, commutant, contains, same_span, span_dimension
from .cpmap import CpMap, compose
from .errors import DensityDefect, InvalidTensor, IsoDefect, RangeEscape, RepresentationDefect
from .numerics import dag, gram_quotient, null_space, opnorm, range_basis
from .stinespring import StinespringTriple, TensorLayer, build, representation_defect, tensor_layer

CORR_TOL = 1e-9
COISOMETRY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Correspondence:
    over: MatrixAlgebra  # M' acting on H
    acting: MatrixAlgebra  # M, intertwined by the basis
    source_dim: int
    target_dim: int
    basis: np.ndarray  # (m, n, d), HS-orthonormal
    target_rep: np.ndarray  # (k, n, n): images of the basis of M on K
    left_rep: Optional[np.ndarray]  # (k', n, n): images of the basis of M' on K

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def gram(self) -> np.ndarray:
        """Operator-valued inner products <X_i, X_j> = X_i^* X_j, shape (m, m, d, d)."""
        return np.einsum("iab,jac->ijbc", np.conj(self.basis), self.basis, optimize=True)

    @cached_property
    def _flat(self) -> np.ndarray:
        return self.basis.reshape(self.dim, -1)

    def coefficients(self, X: np.ndarray) -> np.ndarray:
        return np.conj(self._flat) @ np.asarray(X, dtype=complex).reshape(-1)

    def element(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=complex), self.basis, axes=(0, 0))

    def residual(self, X: np.ndarray) -> float:
        return opnorm(np.asarray(X) - self.element(self.coefficients(X)))

    def phi(self, R: np.ndarray) -> np.ndarray:
        """Left action of R in M' as an operator on K."""
        if self.left_rep is None:
            raise InvalidTensor("correspondence has no left action")
        return np.tensordot(self.over.coefficients(R), self.left_rep, axes=(0, 0))

    def left(self, R: np.ndarray, X: np.ndarray) -> np.ndarray:
        return self.phi(R) @ X

    def right(self, X: np.ndarray, R: np.ndarray) -> np.ndarray:
        return X @ R

    def inner(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return dag(X) @ Y

    def left_matrix(self, R: np.ndarray) -> np.ndarray:
        """Coefficient matrix of X -> phi(R) X in this basis."""
        imgs = np.einsum("ab,jbc->jac", self.phi(R), self.basis)
        return np.conj(self._flat) @ imgs.reshape(self.dim, -1).T


def invariant_defects(corr: Correspondence) -> Dict[str, float]:
    """Intertwining, inner products in M', closure under both actions."""
    out = {"intertwining": 0.0, "inner_in_commutant": 0.0, "right_action": 0.0, "left_action": 0.0}
    M, N = corr.acting, corr.over
    for X in corr.basis:
        for B, rB in zip(M.basis, corr.target_rep):
            out["intertwining"] = max(out["intertwining"], opnorm(X @ B - rB @ X))
    for g in corr.gram.reshape(-1, corr.source_dim, corr.source_dim):
        out["inner_in_commutant"] = max(out["inner_in_commutant"], contains(N, g)[1])
    for R in N.basis:
        for X in corr.basis:
            out["right_action"] = max(out["right_action"], corr.residual(X @ R))
            if corr.left_rep is not None:
                out["left_action"] = max(out["left_action"], corr.residual(corr.left(R, X)))
    return out


def _intertwiner_system(M: MatrixAlgebra, target_rep: np.ndarray) -> np.ndarray:
    d = M.ambient_dim
    n = target_rep.shape[1]
    In, Id = np.eye(n), np.eye(d)
    # row-major vec: vec(X B) = (I (x) B^T) vec X,  vec(rho X) = (rho (x) I) vec X
    return np.concatenate([np.kron(In, B.T) - np.kron(r, Id) for B, r in zip(M.basis, target_rep)])


def kernel_intertwiner_basis(M: MatrixAlgebra, target_rep: np.ndarray) -> np.ndarray:
    """HS-orthonormal basis of L_M(H, K) from the null space of the Kronecker-lifted system."""
    d, n = M.ambient_dim, target_rep.shape[1]
    return null_space(_intertwiner_system(M, target_rep), scale=1.0).basis.T.reshape(-1, n, d)


def unit_intertwiner_basis(M: MatrixAlgebra, target_rep: np.ndarray) -> np.ndarray:
    """HS-orthonormal basis of L_M(H, K) from matrix units of M.

    Every intertwiner is sum_p rho(e_p1) Y e_1p with Y mapping range(e_11) into
    range(rho(e_11)), one block per simple summand.  Matrix units for Y give an
    orthonormal basis once divided by sqrt(block size).
    """
    st = M.structure
    rho = lambda B: np.tensordot(M.coefficients(B), target_rep, axes=(0, 0))
    out = []
    for units in st.units:
        Fs = range_basis(units[0][0], scale=1.0).basis
        Ft = range_basis(rho(units[0][0]), scale=1.0).basis
        size = len(units)
        left = [rho(units[p][0]) @ Ft for p in range(size)]
        right = [dag(Fs) @ units[0][p] for p in range(size)]
        for a in range(Ft.shape[1]):
            for b in range(Fs.shape[1]):
                X = sum(np.outer(l[:, a], r[b]) for l, r in zip(left, right))
                out.append(X / np.sqrt(size))
    n, d = target_rep.shape[1], M.ambient_dim
    return np.stack(out) if out else np.zeros((0, n, d), dtype=complex)


def intertwiner_space(M: MatrixAlgebra, target_rep: np.ndarray, left_rep: Optional[np.ndarray] = None,
                      over: Optional[MatrixAlgebra] = None, method: str = "units") -> Correspondence:
    """Basis of L_M(H, K) = {X : X T = rho(T) X}."""
    target_rep = np.asarray(target_rep, dtype=complex)
    rdef = _rep_defect(M, target_rep)
    if rdef > CORR_TOL:
        raise RepresentationDefect(f"target is not a *-representation (defect {rdef:.3e})", defect=rdef)
    d, n = M.ambient_dim, target_rep.shape[1]
    over = commutant(M).algebra if over is None else over
    if left_rep is None and n == d and np.allclose(target_rep, M.basis, atol=1e-12):
        left_rep = over.basis
    if method == "units":
        basis = unit_intertwiner_basis(M, target_rep)
    elif method == "kernel":
        basis = kernel_intertwiner_basis(M, target_rep)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Correspondence(over, M, d, n, basis, target_rep, left_rep)


def _rep_defect(M: MatrixAlgebra, images: np.ndarray) -> float:
    return representation_defect(M, images)


def density_check(corr: Correspondence) -> Dict[str, int]:
    """Rank of the joint range of the basis operators versus dim K."""
    stacked = np.concatenate(list(corr.basis), axis=1) if corr.dim else np.zeros((corr.target_dim, 0))
    rank = range_basis(stacked, scale=1.0).rank
    report = {"rank": rank, "target_dim": corr.target_dim, "defect": corr.target_dim - rank}
    if rank < corr.target_dim:
        raise DensityDefect(f"ranges span {rank} of {corr.target_dim} dimensions",
                            defect=float(corr.target_dim - rank))
    return report


# ----------------------------------------------------------------- Arveson


@dataclass(frozen=True, eq=False)
class ArvesonCorrespondence:
    corr: Correspondence
    triple: StinespringTriple
    phi_map: np.ndarray  # (m, d, d): Y_i = W^* X_i

    @property
    def source(self) -> CpMap:
        return self.triple.source

    @property
    def dim(self) -> int:
        return self.corr.dim

    def phi_operator(self, Y: np.ndarray) -> np.ndarray:
        """Phi_Y: M (x)_P H -> H, S (x) h -> S Y^* h, in quotient coordinates."""
        M = self.source.domain
        raw = np.concatenate([B @ dag(Y) for B in M.basis], axis=1)
        return raw @ self.triple.layer.quotient.lift

    def to_intertwiner(self, Y: np.ndarray) -> np.ndarray:
        """U_P(Y) = Phi_Y^*."""
        return dag(self.phi_operator(Y))

    def from_intertwiner(self, X: np.ndarray) -> np.ndarray:
        return dag(self.triple.W) @ X

    def coefficients(self, Y: np.ndarray) -> np.ndarray:
        return self.corr.coefficients(self.to_intertwiner(Y))


def stinespring_left_rep(triple: StinespringTriple, over: MatrixAlgebra) -> np.ndarray:
    """I (x) R on M (x)_P H for the basis of M'."""
    layer = triple.layer
    return np.stack([layer.amplify(R, layer) for R in over.basis])


def arveson(P: CpMap, triple: Optional[StinespringTriple] = None,
            over: Optional[MatrixAlgebra] = None) -> ArvesonCorrespondence:
    triple = build(P) if triple is None else triple
    M = P.domain
    over = commutant(M).algebra if over is None else over
    left = stinespring_left_rep(triple, over)
    corr = intertwiner_space(M, triple.pi_basis, left, over)
    Y = np.einsum("ax,iab->ixb", np.conj(triple.W), corr.basis)
    E = ArvesonCorrespondence(corr, triple, Y)
    defects = arveson_defects(E)
    if max(defects.values()) > CORR_TOL:
        raise RepresentationDefect(f"Arveson identification fails: {defects}", defect=max(defects.values()))
    return E


def arveson_defects(E: ArvesonCorrespondence) -> Dict[str, float]:
    """X = Phi_{W^* X}^* on the basis and Phi_Y Phi_Z^* = <X_Y, X_Z>."""
    recon = max((opnorm(E.to_intertwiner(Y) - X) for Y, X in zip(E.phi_map, E.corr.basis)), default=0.0)
    phis = [E.phi_operator(Y) for Y in E.phi_map]
    gram = 0.0
    for i, Pi in enumerate(phis):
        for j, Pj in enumerate(phis):
            gram = max(gram, opnorm(Pi @ dag(Pj) - E.corr.gram[i, j]))
    return {"reconstruction": recon, "gram": gram}


# ----------------------------------------------------------------- tensor products


@dataclass(frozen=True, eq=False)
class TensorCorrespondence:
    """A (x)_{M'} B realised on the quotient of (pairs) (x) H."""

    corr: Correspondence
    factors: Tuple[Correspondence, Correspondence]
    pair_coeffs: np.ndarray  # (mA*mB, r): basis = sum over pairs of coefficient * pair operator
    pair_ops: np.ndarray  # (mA*mB, n, d): operator realising xi_i (x) eta_j

    @property
    def dim(self) -> int:
        return self.corr.dim


def operator_gram_corr(over: MatrixAlgebra, acting: MatrixAlgebra, gram: np.ndarray,
                       left_coeffs: Optional[np.ndarray] = None):
    """Concrete realisation of a module with spanning family v_1..v_p.

    ``gram[i, j]`` is the M'-valued inner product <v_i, v_j> (d x d).  The space
    K is the quotient of C^p (x) H under <v_i (x) e_a, v_j (x) e_b> = gram[i,j][a,b]
    and v_i is realised as h -> v_i (x) h.  ``left_coeffs[l]`` (p x p) describes the
    left action of the l-th basis element of M' on the spanning family.
    Returns (correspondence, pair coefficient matrix, spanning operators).
    """
    p, d = gram.shape[0], gram.shape[2]
    G = gram.transpose(0, 2, 1, 3).reshape(p * d, p * d)
    gq = gram_quotient(G, scale=1.0)
    n = gq.dim
    ops = gq.embed.reshape(n, p, d).transpose(1, 0, 2)  # v_i as operator H -> K
    target = np.stack([gq.embed @ np.kron(np.eye(p), B) @ gq.lift for B in acting.basis])
    left = None
    if left_coeffs is not None:
        left = np.stack([gq.embed @ np.kron(L, np.eye(d)) @ gq.lift for L in left_coeffs])
    flat = ops.reshape(p, -1).T  # columns are vec(v_i)
    u, s, vh = np.linalg.svd(flat, full_matrices=False)
    r = int(np.sum(s > 1e-9 * max(s[0] if s.size else 0.0, 1.0)))
    coeffs = dag(vh[:r]) / s[:r][None, :]
    basis = (flat @ coeffs).T.reshape(r, n, d)
    corr = Correspondence(over, acting, d, n, basis, target, left)
    return corr, coeffs, ops


def _same_algebra(A: MatrixAlgebra, B: MatrixAlgebra) -> bool:
    return A is B or same_span(A, B)


def tensor(A: Correspondence, B: Correspondence) -> TensorCorrespondence:
    """Balanced tensor product A (x)_{M'} B with <x1 (x) y1, x2 (x) y2> = <y1, phi_B(<x1, x2>) y2>."""
    if A.source_dim != B.source_dim or not _same_algebra(A.over, B.over) \
            or not _same_algebra(A.acting, B.acting):
        raise InvalidTensor("factors live over different algebras")
    if B.left_rep is None:
        raise InvalidTensor("right factor needs a left action")
    mA, mB, d = A.dim, B.dim, A.source_dim
    over = A.over
    gA = A.gram  # (mA, mA, d, d)
    phi_g = np.tensordot(over.coefficients_many(gA), B.left_rep, axes=(2, 0))  # (mA, mA, nB, nB)
    # <x_i (x) y_j, x_k (x) y_l> = y_j^* phi(g_ik) y_l
    gram = np.einsum("jxa,ikxy,lyb->ijklab", np.conj(B.basis), phi_g, B.basis)
    gram = gram.reshape(mA * mB, mA * mB, d, d)
    left_coeffs = None
    if A.left_rep is not None:
        left_coeffs = np.stack([np.kron(A.left_matrix(R), np.eye(mB)) for R in over.basis])
    corr, coeffs, ops = operator_gram_corr(over, A.acting, gram, left_coeffs)
    return TensorCorrespondence(corr, (A, B), coeffs, ops)


# ----------------------------------------------------------------- multiplication maps


@dataclass(frozen=True, eq=False)
class MultiplicationReport:
    matrix: np.ndarray  # dim E_PQ x dim(E_P (x) E_Q)
    domain_dim: int
    range_dim: int
    kernel_dim: int
    coisometry_defect: float
    isometry_defect: float
    range_residual: float

    def as_dict(self) -> Dict[str, object]:
        return {"domain_dim": self.domain_dim, "range_dim": self.range_dim,
                "kernel_dim": self.kernel_dim, "coisometry_defect": self.coisometry_defect,
                "isometry_defect": self.isometry_defect, "range_residual": self.range_residual}


def multiplication_map(EP: ArvesonCorrespondence, EQ: ArvesonCorrespondence,
                       EPQ: ArvesonCorrespondence) -> MultiplicationReport:
    """m(Y (x) Z) = Y Z from E_P (x) E_Q into E_{P o Q}."""
    T = tensor(EP.corr, EQ.corr)
    mP, mQ = EP.dim, EQ.dim
    cols = []
    worst = 0.0
    for i in range(mP):
        for j in range(mQ):
            X = EPQ.to_intertwiner(EP.phi_map[i] @ EQ.phi_map[j])
            c = EPQ.corr.coefficients(X)
            worst = max(worst, opnorm(X - EPQ.corr.element(c)))
            cols.append(c)
    scale = max(1.0, max((opnorm(x) for x in EPQ.corr.basis), default=1.0))
    if worst > CORR_TOL * scale:
        raise RangeEscape(f"products leave E_PQ (residual {worst:.3e})", defect=worst)
    pair_matrix = np.stack(cols, axis=1) if cols else np.zeros((EPQ.dim, 0))
    m = pair_matrix @ T.pair_coeffs
    r = m.shape[1]
    co = opnorm(m @ dag(m) - np.eye(m.shape[0]))
    iso = opnorm(dag(m) @ m - np.eye(r))
    rank = range_basis(m, scale=1.0).rank if m.size else 0
    return MultiplicationReport(m, r, rank, r - rank, co, iso, worst)


def check_coisometry(report: MultiplicationReport, tol: float = COISOMETRY_TOL) -> None:
    if report.coisometry_defect > tol:
        raise IsoDefect(f"m m^* differs from I by {report.coisometry_defect:.3e}",
                        defect=report.coisometry_defect)


@dataclass(frozen=True, eq=False)
class PsiData:
    """Psi(X (x) Y) = (I (x) X) Y and V_0(S (x) h) = S (x) I (x) h for the pair (P, Q)."""

    outer: TensorLayer  # M (x)_Q (M (x)_P H)
    V0: np.ndarray  # M (x)_{P o Q} H -> M (x)_Q M (x)_P H
    psi_pairs: np.ndarray  # (mP, mQ, n, d)


def psi_data(EP: ArvesonCorrespondence, EQ: ArvesonCorrespondence,
             EPQ: ArvesonCorrespondence) -> PsiData:
    P, Q = EP.source, EQ.source
    inner = EP.triple.layer  # M (x)_P H
    outer = tensor_layer(Q, inner.rep)  # M (x)_Q (M (x)_P H)
    M = P.domain
    k, d = M.dim, M.ambient_dim
    # S (x) h -> S (x) (I (x) h): raw (i, a) -> (i, W_P e_a)
    V0 = outer.quotient.embed @ np.kron(np.eye(k), EP.triple.W) @ EPQ.triple.layer.quotient.lift
    psi = np.empty((EP.dim, EQ.dim, outer.dim, d), dtype=complex)
    for i, X in enumerate(EP.corr.basis):
        IX = outer.amplify(X, EQ.triple.layer)
        for j, Y in enumerate(EQ.corr.basis):
            psi[i, j] = IX @ Y
    return PsiData(outer, V0, psi)


def psi_defects(EP: ArvesonCorrespondence, EQ: ArvesonCorrespondence,
                EPQ: ArvesonCorrespondence) -> Dict[str, float]:
    """Inner-product preservation of Psi, isometry of V_0 and the comultiplication identity."""
    data = psi_data(EP, EQ, EPQ)
    mP, mQ = EP.dim, EQ.dim
    d = EP.corr.source_dim
    psi = data.psi_pairs.reshape(mP * mQ, -1, d)
    A, B = EP.corr, EQ.corr
    phi_g = np.tensordot(A.over.coefficients_many(A.gram), B.left_rep, axes=(2, 0))
    gram = np.einsum("jxa,ikxy,lyb->ijklab", np.conj(B.basis), phi_g, B.basis).reshape(mP * mQ, mP * mQ, d, d)
    ip = 0.0
    for a in range(mP * mQ):
        for b in range(mP * mQ):
            ip = max(ip, opnorm(dag(psi[a]) @ psi[b] - gram[a, b]))
    v0 = opnorm(dag(data.V0) @ data.V0 - np.eye(data.V0.shape[1]))
    comult = 0.0
    for i in range(mP):
        for j in range(mQ):
            lhs = EPQ.to_intertwiner(EP.phi_map[i] @ EQ.phi_map[j])
            rhs = dag(data.V0) @ data.psi_pairs[i, j]
            comult = max(comult, opnorm(lhs - rhs))
    return {"psi_inner_product": ip, "V0_isometry": v0, "comultiplication": comult}


def conjugation_iso_check(P: CpMap, alpha: CpMap, alpha_inverse: CpMap) -> Dict[str, float]:
    """E_P against E_alpha (x) E_Q (x) E_{alpha^-1} for Q = alpha^-1 o P o alpha, via R S T."""
    Q = compose(alpha_inverse, compose(P, alpha))
    Ea, EQ, Eai, EP = arveson(alpha), arveson(Q), arveson(alpha_inverse), arveson(P)
    first = tensor(Ea.corr, EQ.corr)
    triple = tensor(first.corr, Eai.corr)
    d = P.d
    # abstract inner products of the pair-of-pair family, mapped into the tensor basis
    images = []
    for a in range(Ea.dim):
        for b in range(EQ.dim):
            for c in range(Eai.dim):
                Y = Ea.phi_map[a] @ EQ.phi_map[b] @ Eai.phi_map[c]
                images.append(EP.to_intertwiner(Y))
    images = np.stack(images)
    gram_img = np.einsum("iab,jac->ijbc", np.conj(images), images)
    # abstract side: iterate the balanced inner product by hand
    gA, gB, gC = Ea.corr.gram, EQ.corr.gram, Eai.corr.gram
    over = Ea.corr.over
    phiB = np.tensordot(over.coefficients_many(gA), EQ.corr.left_rep, axes=(2, 0))
    inner_ab = np.einsum("jxa,ikxy,lyb->ijklab", np.conj(EQ.corr.basis), phiB, EQ.corr.basis)
    mA, mB, mC = Ea.dim, EQ.dim, Eai.dim
    inner_ab = inner_ab.reshape(mA * mB, mA * mB, d, d)
    phiC = np.tensordot(over.coefficients_many(inner_ab), Eai.corr.left_rep, axes=(2, 0))
    inner_abc = np.einsum("jxa,ikxy,lyb->ijklab", np.conj(Eai.corr.basis), phiC, Eai.corr.basis)
    inner_abc = inner_abc.reshape(mA * mB * mC, mA * mB * mC, d, d)
    gram_defect = float(np.max(np.abs(gram_img - inner_abc))) if images.size else 0.0
    rank_img = span_dimension(list(images))
    return {"gram_defect": gram_defect, "dim_E_P": EP.dim, "dim_triple_tensor": triple.dim,
            "dim_image": rank_img, "dim_E_Q": EQ.dim}


def commutant_spanning_dim(E: ArvesonCorrespondence) -> int:
    """Dimension of span{<X, Y>} inside M'."""
    return span_dimension(list(E.corr.gram.reshape(-1, E.corr.source_dim, E.corr.source_dim)))
