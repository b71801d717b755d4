"""Covariant representations (T, sigma) of a correspondence over M'.

The contraction ``t_tilde`` acts on the interior tensor product E (x)_sigma H0,
realised as the Gram quotient of C^m (x) H0 under
``<X_i (x) x, X_j (x) y> = <x, sigma(<X_i, X_j>) y>``, and is determined by
``t_tilde(X (x) h) = T(X) h``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np

from .algebra import MatrixAlgebra, commutant, contains, from_generators
from .correspondence import ArvesonCorrespondence, Correspondence
from .cpmap import CpMap, choi_from_superop, endomorphism_defect, kraus_from_choi
from .errors import NotMultiplicative, RangeEscape, RepresentationDefect
from .numerics import GramQuotient, dag, gram_quotient, max_opnorm, null_space, opnorm

REP_TOL = 1e-9
CONTRACTION_TOL = 1e-10
THETA_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CovariantRep:
    corr: Correspondence
    rep_space_dim: int
    sigma: np.ndarray  # (k', n0, n0) images of the basis of M'
    T_on_basis: np.ndarray  # (m, n0, n0)
    quotient: GramQuotient  # E (x)_sigma H0
    t_tilde: np.ndarray  # (n0, dim E (x)_sigma H0)

    @property
    def over(self) -> MatrixAlgebra:
        return self.corr.over

    def sigma_of(self, R: np.ndarray) -> np.ndarray:
        return np.tensordot(self.over.coefficients(R), self.sigma, axes=(0, 0))

    def T(self, X: np.ndarray) -> np.ndarray:
        return np.tensordot(self.corr.coefficients(X), self.T_on_basis, axes=(0, 0))

    def tensor_vector(self, coeffs: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Quotient image of (sum_i c_i X_i) (x) h; h may hold several columns."""
        h = np.asarray(h, dtype=complex)
        col = h.ndim == 1
        h = h[:, None] if col else h
        out = self.quotient.embed @ np.kron(np.asarray(coeffs, dtype=complex)[:, None], h)
        return out[:, 0] if col else out

    def induced_left(self, R: np.ndarray) -> np.ndarray:
        """(sigma^E o phi)(R) = phi(R) (x) I on E (x)_sigma H0."""
        L = self.corr.left_matrix(R)
        return self.quotient.embed @ np.kron(L, np.eye(self.rep_space_dim)) @ self.quotient.lift

    def one_tensor(self, S: np.ndarray) -> np.ndarray:
        """1_E (x) S on E (x)_sigma H0 for S commuting with sigma(M')."""
        m = self.corr.dim
        return self.quotient.embed @ np.kron(np.eye(m), S) @ self.quotient.lift

    def theta(self, S: np.ndarray) -> np.ndarray:
        return self.t_tilde @ self.one_tensor(S) @ dag(self.t_tilde)

    @cached_property
    def commutant_of_sigma(self) -> MatrixAlgebra:
        images = from_generators(self.rep_space_dim, list(self.sigma))
        return commutant(images).algebra


def interior_quotient(corr: Correspondence, sigma: np.ndarray) -> GramQuotient:
    m = corr.dim
    n0 = sigma.shape[1]
    coeffs = corr.over.coefficients_many(corr.gram)  # (m, m, k')
    G = np.einsum("ijl,lxy->ixjy", coeffs, sigma).reshape(m * n0, m * n0)
    return gram_quotient(G, scale=1.0)


def covariant_rep(corr: Correspondence, sigma: np.ndarray, T_on_basis: np.ndarray,
                  check: bool = True) -> CovariantRep:
    sigma = np.asarray(sigma, dtype=complex)
    T_on_basis = np.asarray(T_on_basis, dtype=complex)
    n0 = sigma.shape[1]
    gq = interior_quotient(corr, sigma)
    raw = np.concatenate(list(T_on_basis), axis=1) if corr.dim else np.zeros((n0, 0))
    t_tilde = raw @ gq.lift
    rep = CovariantRep(corr, n0, sigma, T_on_basis, gq, t_tilde)
    if check:
        defects = rep_defects(rep)
        bad = {k: v for k, v in defects.items() if v > (CONTRACTION_TOL if k == "contraction" else REP_TOL)}
        if bad:
            raise RepresentationDefect(f"not a completely contractive covariant representation: {bad}",
                                       defect=max(bad.values()))
    return rep


def embedding_representation(corr: Correspondence, iota: np.ndarray) -> CovariantRep:
    """T(X) = iota^* X with sigma the identity representation of M'."""
    T = np.einsum("ax,iab->ixb", np.conj(iota), corr.basis)
    return covariant_rep(corr, corr.over.basis, T)


def identity_representation(EP: ArvesonCorrespondence) -> CovariantRep:
    """T(X) = W_P^* X on H, sigma = id."""
    return embedding_representation(EP.corr, EP.triple.W)


def scaled(rep: CovariantRep, c: float) -> CovariantRep:
    return covariant_rep(rep.corr, rep.sigma, c * rep.T_on_basis, check=False)


def rep_defects(rep: CovariantRep) -> Dict[str, float]:
    corr = rep.corr
    N = corr.over
    out = {"bimodule": 0.0, "contraction": max(0.0, opnorm(rep.t_tilde) - 1.0), "covariance": 0.0,
           "sigma": 0.0}
    from .stinespring import representation_defect

    out["sigma"] = representation_defect(N, rep.sigma)
    if corr.left_rep is not None:
        for S in N.basis:
            sS = rep.sigma_of(S)
            for R in N.basis:
                sR = rep.sigma_of(R)
                for X in corr.basis:
                    lhs = rep.T(corr.left(S, X) @ R)
                    out["bimodule"] = max(out["bimodule"], opnorm(lhs - sS @ rep.T(X) @ sR))
            out["covariance"] = max(out["covariance"],
                                    opnorm(rep.t_tilde @ rep.induced_left(S) - sS @ rep.t_tilde))
    else:
        for R in N.basis:
            sR = rep.sigma_of(R)
            for X in corr.basis:
                out["bimodule"] = max(out["bimodule"], opnorm(rep.T(X @ R) - rep.T(X) @ sR))
    return out


def recovered_T(rep: CovariantRep) -> np.ndarray:
    """T(X_i) read back from t_tilde via X_i (x) h."""
    m = rep.corr.dim
    eye = np.eye(m)
    return np.stack([rep.t_tilde @ rep.tensor_vector(eye[i], np.eye(rep.rep_space_dim)) for i in range(m)])


def isometric_defect(rep: CovariantRep) -> float:
    corr = rep.corr
    T = rep.T_on_basis
    lhs = np.matmul(dag(T)[:, None], T[None, :])
    coeffs = rep.over.coefficients_many(corr.gram.reshape(-1, *corr.gram.shape[2:]))
    rhs = np.tensordot(coeffs, rep.sigma, axes=(1, 0))
    return max_opnorm(lhs.reshape(rhs.shape) - rhs)


def is_isometric(rep: CovariantRep, tol: float = REP_TOL) -> Tuple[bool, float]:
    d = isometric_defect(rep)
    return d <= tol, d


def coisometric_defect(rep: CovariantRep) -> float:
    return opnorm(rep.t_tilde @ dag(rep.t_tilde) - np.eye(rep.rep_space_dim))


def is_fully_coisometric(rep: CovariantRep, tol: float = REP_TOL) -> Tuple[bool, float]:
    d = coisometric_defect(rep)
    return d <= tol, d


def _trace_expectation(N: MatrixAlgebra) -> np.ndarray:
    """Superoperator of the HS-orthogonal projection onto N (a unital CP map)."""
    F = N.basis.reshape(N.dim, -1)
    return F.T @ np.conj(F)


def induced_cp_map(rep: CovariantRep) -> CpMap:
    """Theta(S) = t_tilde (1 (x) S) t_tilde^* on sigma(M')', extended by the trace expectation."""
    N = rep.commutant_of_sigma
    n0 = rep.rep_space_dim
    for B in N.basis:
        ok, res = contains(N, rep.theta(B))
        if not ok:
            raise RangeEscape(f"Theta leaves sigma(M')' (residual {res:.3e})", defect=res)
    E = _trace_expectation(N)
    units = np.eye(n0 * n0, dtype=complex).reshape(n0 * n0, n0, n0)
    cols = [rep.theta((E @ u.reshape(-1)).reshape(n0, n0)).reshape(-1) for u in units]
    S = np.stack(cols, axis=1)
    ops = kraus_from_choi(choi_from_superop(S))
    return CpMap(N, ops, choi_from_superop(S), S)


def restricted_distance(P: CpMap, Q: CpMap, algebra: Optional[MatrixAlgebra] = None) -> float:
    """max over the HS basis of the algebra of ||P(B) - Q(B)||."""
    A = P.domain if algebra is None else algebra
    diff = P.apply_many(A.basis) - Q.apply_many(A.basis)
    return max_opnorm(diff)


def _right_matrices(corr: Correspondence) -> np.ndarray:
    flat = np.conj(corr.basis.reshape(corr.dim, -1))
    out = []
    for R in corr.over.basis:
        imgs = np.einsum("jab,bc->jac", corr.basis, R).reshape(corr.dim, -1)
        out.append(flat @ imgs.T)
    return np.stack(out)


@dataclass(frozen=True, eq=False)
class Decomposition:
    projection: np.ndarray  # Q on E in basis coordinates; E1 = range Q
    complement: np.ndarray
    q: np.ndarray  # t_tilde^* t_tilde
    defects: Dict[str, float]


def multiplicative_decomposition(rep: CovariantRep, tol: float = 1e-8) -> Decomposition:
    """Split E = E1 + E2 with T isometric on E1 and zero on E2."""
    theta = induced_cp_map(rep)
    mult = endomorphism_defect(theta)
    if mult > tol:
        raise NotMultiplicative(f"Theta is not multiplicative (defect {mult:.3e})", defect=mult)
    q = dag(rep.t_tilde) @ rep.t_tilde
    m, n0 = rep.corr.dim, rep.rep_space_dim
    # right-module maps: Q commutes with every right-action matrix
    Rm = _right_matrices(rep.corr)
    Im = np.eye(m)
    system = np.concatenate([np.kron(Im, R.T) - np.kron(R, Im) for R in Rm]) if len(Rm) else np.zeros((0, m * m))
    module_maps = null_space(system, scale=1.0).basis.T.reshape(-1, m, m)
    # least squares for sum_c a_c (Q_c (x) I) pushed to the quotient = q
    imgs = [rep.quotient.embed @ np.kron(Qc, np.eye(n0)) @ rep.quotient.lift for Qc in module_maps]
    A = np.stack([x.reshape(-1) for x in imgs], axis=1)
    a, *_ = np.linalg.lstsq(A, q.reshape(-1), rcond=None)
    Qm = np.tensordot(a, module_maps, axes=(0, 0))
    Qm = 0.5 * (Qm + dag(Qm))
    defects = {
        "multiplicativity": mult,
        "q_projection": opnorm(q @ q - q),
        "extraction": opnorm((A @ a).reshape(q.shape) - q),
        "Q_projection": opnorm(Qm @ Qm - Qm),
    }
    # columns of Qm (resp. I - Qm) are coordinates of elements spanning E1 (resp. E2)
    X1 = np.tensordot(Qm.T, rep.corr.basis, axes=(1, 0))
    X2 = np.tensordot((Im - Qm).T, rep.corr.basis, axes=(1, 0))
    iso = 0.0
    for xi in X1:
        for xj in X1:
            lhs = dag(rep.T(xi)) @ rep.T(xj)
            iso = max(iso, opnorm(lhs - rep.sigma_of(dag(xi) @ xj)))
    defects["E1_isometric"] = iso
    defects["E2_zero"] = max((opnorm(rep.T(x)) for x in X2), default=0.0)
    return Decomposition(Qm, Im - Qm, q, defects)
