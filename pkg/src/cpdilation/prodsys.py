"""Discrete product systems of M'-correspondences on an integer time grid.

For a partition 0 = t_0 < t_1 < ... < t_n = t the space
H_p = M (x)_{P_{g_1}} M (x)_{P_{g_2}} ... (x)_{P_{g_n}} H, with gaps g_j = t_j - t_{j-1},
is built from the inside out as nested tensor layers.  Leg j (counted from the
left) carries gap g_j.  Layers are memoised per semigroup by the tuple of gaps
of the suffix they realise, so every partition shares its inner spaces with
all partitions that end the same way.

Concatenation follows the convention X (x) Y -> (I_s (x) X) Y for X in E(t) and
Y in E(s): the legs of the partition of [0, s] sit outside (left of) those of
the partition of [0, t].
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import (MatrixAlgebra, commutant, contains, random_representation_commutant,
                      representation_corners, span_dimension)
from .correspondence import Correspondence, intertwiner_space
from .covrep import (CovariantRep, coisometric_defect, covariant_rep, embedding_representation,
                     induced_cp_map, interior_quotient, isometric_defect, restricted_distance)
from .cpmap import CpMap, compose, endomorphism_defect, SemigroupSpec
from .errors import (DilationDefect, GapExceedsHorizon, IsoDefect, NotARefinement,
                     RepresentationDefect, SemigroupDefect)
from .numerics import dag, opnorm, range_basis
from .stinespring import TensorLayer, tensor_layer

ISO_TOL = 1e-8
REFINE_TOL = 1e-10
IMPLEMENT_TOL = 1e-10
DILATION_TOL = 1e-8
SEMIGROUP_TOL = 1e-9
_SAMPLE_SEED = 11


@dataclass(frozen=True)
class Partition:
    endpoint: int
    points: Tuple[int, ...]

    def __post_init__(self):
        pts = tuple(int(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if not pts or pts[0] != 0 or pts[-1] != self.endpoint:
            raise ValueError(f"partition must run from 0 to {self.endpoint}: {pts}")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError(f"partition points must increase strictly: {pts}")

    @classmethod
    def of(cls, points: Sequence[int]) -> "Partition":
        points = tuple(points)
        return cls(points[-1], points)

    @classmethod
    def trivial(cls, t: int) -> "Partition":
        return cls(t, (0, t) if t else (0,))

    @classmethod
    def finest(cls, t: int) -> "Partition":
        return cls(t, tuple(range(t + 1)))

    @property
    def gaps(self) -> Tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.points, self.points[1:]))

    def refines(self, other: "Partition") -> bool:
        return self.endpoint == other.endpoint and set(other.points) <= set(self.points)


def concat(p1: Partition, p2: Partition) -> Partition:
    """p2 joined with p1 + s, for p1 a partition of [0, t] and p2 of [0, s]."""
    s = p2.endpoint
    return Partition(p1.endpoint + s, p2.points + tuple(p + s for p in p1.points[1:]))


def all_partitions(t: int) -> List[Partition]:
    inner = range(1, t)
    out = []
    for r in range(len(inner) + 1):
        for pts in combinations(inner, r):
            out.append(Partition(t, (0,) + pts + (t,)))
    return out


# ---------------------------------------------------------------- nested layers

_CACHES: "weakref.WeakKeyDictionary[SemigroupSpec, Dict]" = weakref.WeakKeyDictionary()


def _cache(sg: SemigroupSpec) -> Dict:
    c = _CACHES.get(sg)
    if c is None:
        c = {"layer": {}, "mprime": {}, "iota": {}, "corr": {}, "over": None}
        _CACHES[sg] = c
    return c


def _over(sg: SemigroupSpec) -> MatrixAlgebra:
    c = _cache(sg)
    if c["over"] is None:
        c["over"] = commutant(sg.generator.domain).algebra
    return c["over"]


def _check_gaps(sg: SemigroupSpec, gaps: Tuple[int, ...]) -> None:
    for g in gaps:
        if g > sg.horizon:
            raise GapExceedsHorizon(f"gap {g} exceeds the semigroup horizon {sg.horizon}", gap=g)


def _layer(sg: SemigroupSpec, gaps: Tuple[int, ...]) -> Optional[TensorLayer]:
    """M (x)_{P_{g_1}} (space of gaps[1:]); None for the empty suffix (the space H)."""
    if not gaps:
        return None
    c = _cache(sg)["layer"]
    if gaps not in c:
        _check_gaps(sg, gaps)
        c[gaps] = tensor_layer(sg[gaps[0]], _m_rep(sg, gaps[1:]))
    return c[gaps]


def _dim(sg: SemigroupSpec, gaps: Tuple[int, ...]) -> int:
    return sg.generator.d if not gaps else _layer(sg, gaps).dim


def _m_rep(sg: SemigroupSpec, gaps: Tuple[int, ...]) -> np.ndarray:
    return sg.generator.domain.basis if not gaps else _layer(sg, gaps).rep


def _mprime_rep(sg: SemigroupSpec, gaps: Tuple[int, ...]) -> np.ndarray:
    """I (x) ... (x) I (x) R on the last leg, for the basis of M'."""
    c = _cache(sg)["mprime"]
    if gaps not in c:
        if not gaps:
            c[gaps] = _over(sg).basis
        else:
            layer = _layer(sg, gaps)
            c[gaps] = np.stack([layer.amplify(r, layer) for r in _mprime_rep(sg, gaps[1:])])
    return c[gaps]


def _iota(sg: SemigroupSpec, gaps: Tuple[int, ...]) -> np.ndarray:
    """h -> I (x) ... (x) I (x) h from H into the space of ``gaps``."""
    c = _cache(sg)["iota"]
    if gaps not in c:
        if not gaps:
            c[gaps] = np.eye(sg.generator.d, dtype=complex)
        else:
            c[gaps] = _layer(sg, gaps).insert_identity() @ _iota(sg, gaps[1:])
    return c[gaps]


def amplify_prefix(sg: SemigroupSpec, prefix: Tuple[int, ...], src: Tuple[int, ...],
                   tgt: Tuple[int, ...], Y: np.ndarray) -> np.ndarray:
    """I_prefix (x) Y from H_{prefix + src} to H_{prefix + tgt}."""
    if not prefix:
        return Y
    inner = amplify_prefix(sg, prefix[1:], src, tgt, Y)
    return _layer(sg, prefix + tgt).amplify(inner, _layer(sg, prefix + src))


def left_insertion(sg: SemigroupSpec, gaps: Tuple[int, ...], extra: Tuple[int, ...]) -> np.ndarray:
    """zeta -> I (x) ... (x) I (x) zeta from H_gaps to H_{extra + gaps}."""
    out = np.eye(_dim(sg, gaps), dtype=complex)
    for j in range(len(extra) - 1, -1, -1):
        out = _layer(sg, extra[j:] + gaps).insert_identity() @ out
    return out


# ---------------------------------------------------------------- partition spaces

@dataclass(frozen=True, eq=False)
class PartitionSpace:
    partition: Partition
    semigroup: SemigroupSpec
    dim: int
    quotient: object  # GramQuotient of the outermost layer (None for the empty partition)
    m_action: np.ndarray
    mprime_action: np.ndarray

    @property
    def gaps(self) -> Tuple[int, ...]:
        return self.partition.gaps

    @cached_property
    def iota(self) -> np.ndarray:
        return _iota(self.semigroup, self.gaps)


def build_partition_space(sg: SemigroupSpec, p: Partition) -> PartitionSpace:
    gaps = p.gaps
    _check_gaps(sg, gaps)
    layer = _layer(sg, gaps)
    m_action = _m_rep(sg, gaps)
    mprime = _mprime_rep(sg, gaps)
    space = PartitionSpace(p, sg, _dim(sg, gaps), None if layer is None else layer.quotient, m_action, mprime)
    # Frobenius norm bounds the operator norm and avoids one SVD per pair
    comm = max((float(np.linalg.norm(a @ b - b @ a)) for a in m_action for b in mprime), default=0.0)
    if comm > REFINE_TOL:
        raise RepresentationDefect(f"M and M' actions fail to commute (defect {comm:.3e})", defect=comm)
    return space


def _split(sg: SemigroupSpec, gaps: Tuple[int, ...], j: int, a: int) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Insert a point inside leg j at distance a from its left end: ... T_j ... -> ... T_j (x) I ..."""
    b = gaps[j] - a
    new = gaps[:j] + (a, b) + gaps[j + 1:]
    Y = _layer(sg, new[j + 1:]).insert_identity()  # Z -> M (x)_{P_b} Z
    core = _layer(sg, new[j:]).amplify(Y, _layer(sg, gaps[j:]))
    return amplify_prefix(sg, gaps[:j], gaps[j:], new[j:], core), new


def _chain(sg: SemigroupSpec, p: Partition, new_points: Sequence[int]) -> np.ndarray:
    v = np.eye(_dim(sg, p.gaps), dtype=complex)
    points = list(p.points)
    for s in new_points:
        j = max(i for i, x in enumerate(points) if x < s)
        gaps = tuple(b_ - a_ for a_, b_ in zip(points, points[1:]))
        step, _ = _split(sg, gaps, j, s - points[j])
        v = step @ v
        points = sorted(points + [s])
    return v


def refinement_isometry(sg: SemigroupSpec, p: Partition, p_fine: Partition,
                        report: Optional[Dict[str, float]] = None) -> np.ndarray:
    """v0: H_p -> H_{p_fine}, inserting I at every new point."""
    if not p_fine.refines(p):
        raise NotARefinement(f"{p_fine.points} does not refine {p.points}")
    _check_gaps(sg, p.gaps)
    new = sorted(set(p_fine.points) - set(p.points))
    v = _chain(sg, p, new)
    iso = opnorm(dag(v) @ v - np.eye(v.shape[1]))
    order = opnorm(_chain(sg, p, new[::-1]) - v) if len(new) > 1 else 0.0
    cocycle = 0.0
    if len(new) > 1:
        mid = Partition(p.endpoint, tuple(sorted(set(p.points) | set(new[::2]))))
        cocycle = opnorm(_chain(sg, mid, new[1::2]) @ _chain(sg, p, new[::2]) - v)
    defects = {"isometry": iso, "order": order, "cocycle": cocycle}
    if report is not None:
        report.update(defects)
    worst = max(defects.values())
    if worst > REFINE_TOL:
        raise IsoDefect(f"refinement maps are inconsistent: {defects}", defect=worst)
    return v


# ---------------------------------------------------------------- correspondences

@dataclass(frozen=True, eq=False)
class PartitionCorrespondence:
    space: PartitionSpace
    corr: Correspondence
    factorization: Dict[str, float]

    @property
    def dim(self) -> int:
        return self.corr.dim


def _corr(sg: SemigroupSpec, gaps: Tuple[int, ...]) -> Correspondence:
    c = _cache(sg)["corr"]
    if gaps not in c:
        M = sg.generator.domain
        c[gaps] = intertwiner_space(M, _m_rep(sg, gaps), _mprime_rep(sg, gaps), _over(sg))
    return c[gaps]


def _left_matrices(corr: Correspondence) -> np.ndarray:
    return np.stack([corr.left_matrix(R) for R in corr.over.basis])


def _abstract_gram(corrs: Sequence[Correspondence]) -> np.ndarray:
    """Balanced Gram of corrs[n-1] (x) ... (x) corrs[0], indexed by tuples (i_1, ..., i_n) of
    factor indices with i_1 the innermost (rightmost) factor; shape (N, N, d, d)."""
    over = corrs[0].over
    G = corrs[0].gram
    for k in range(1, len(corrs)):
        prev = corrs[k - 1]
        L = _left_matrices(prev)  # phi(R) on the previous outermost factor
        gc = over.coefficients_many(corrs[k].gram)  # (m, m, k')
        phi = np.tensordot(gc, L, axes=(2, 0))  # (m, m, mp, mp): phi(<x, x'>)[c, j]
        n_prev = G.shape[0]
        mp = prev.dim
        rest = n_prev // mp
        # tuples are ordered outermost factor first: I = (a, i), J = (c', b)
        Gr = G.reshape(mp, rest, mp, rest, *G.shape[2:])
        # <x (x) Y_I, x' (x) Y_J> = sum_c phi(<x, x'>)[c, j] <Y_I, Y_(c, J_rest)>
        new = np.einsum("xycj,aicbuv->xaiyjbuv", phi, Gr, optimize=True)
        m = corrs[k].dim
        G = new.reshape(m * n_prev, m * n_prev, *G.shape[2:])
    return G


def _product_images(sg: SemigroupSpec, gaps: Tuple[int, ...], factors: Sequence[Correspondence]) -> np.ndarray:
    """(I (x) xi_n) ... (I (x) xi_2) xi_1 for all basis tuples, outermost factor index first."""
    Z = factors[0].basis
    for k in range(1, len(gaps)):
        prefix = gaps[:k]
        amps = [amplify_prefix(sg, prefix, (), (gaps[k],), x) for x in factors[k].basis]
        Z = np.stack([A @ z for A in amps for z in Z])
    return Z


def partition_correspondence(sg: SemigroupSpec, p: Partition, check: bool = True) -> PartitionCorrespondence:
    space = build_partition_space(sg, p)
    corr = _corr(sg, p.gaps)
    fact: Dict[str, float] = {}
    if check and len(p.gaps) > 1:
        factors = [_corr(sg, (g,)) for g in p.gaps]
        Z = _product_images(sg, p.gaps, factors)
        conc = np.einsum("iab,jac->ijbc", np.conj(Z), Z, optimize=True)
        fact["gram"] = float(np.max(np.abs(conc - _abstract_gram(factors))))
        fact["containment"] = max(corr.residual(z) for z in Z)
        rank = range_basis(Z.reshape(len(Z), -1).T, scale=1.0).rank
        fact["rank_deficit"] = float(corr.dim - rank)
        worst = max(fact["gram"], fact["containment"], abs(fact["rank_deficit"]))
        if worst > ISO_TOL:
            raise IsoDefect(f"L_M(H, H_p) does not factor over the gaps: {fact}", defect=worst)
    return PartitionCorrespondence(space, corr, fact)


def concat_images(sg: SemigroupSpec, p1: Partition, p2: Partition) -> np.ndarray:
    """(I_s (x) X_i) Y_j for the bases of E(p1) and E(p2), index (i, j)."""
    E1, E2 = _corr(sg, p1.gaps), _corr(sg, p2.gaps)
    amps = [amplify_prefix(sg, p2.gaps, (), p1.gaps, X) for X in E1.basis]
    return np.stack([A @ Y for A in amps for Y in E2.basis])


def concat_iso_check(sg: SemigroupSpec, p1: Partition, p2: Partition,
                     p3: Optional[Partition] = None) -> Dict[str, object]:
    """X (x) Y -> (I_s (x) X) Y from E(p1) (x) E(p2) onto E(concat(p1, p2))."""
    p = concat(p1, p2)
    _check_gaps(sg, p.gaps)
    if p.endpoint > sg.horizon:
        raise GapExceedsHorizon(f"t + s = {p.endpoint} exceeds the horizon {sg.horizon}")
    E1, E2, E = _corr(sg, p1.gaps), _corr(sg, p2.gaps), _corr(sg, p.gaps)
    Z = concat_images(sg, p1, p2)
    conc = np.einsum("iab,jac->ijbc", np.conj(Z), Z, optimize=True)
    balanced = _abstract_gram([E2, E1])  # index (i, j) with i over E1 outermost
    report: Dict[str, object] = {"partition": list(p.points), "dims": [E1.dim, E2.dim, E.dim]}
    report["inner_product_defect"] = float(np.max(np.abs(conc - balanced))) if len(Z) else 0.0
    report["containment"] = max((E.residual(z) for z in Z), default=0.0)
    rank = range_basis(Z.reshape(len(Z), -1).T, scale=1.0).rank if len(Z) else 0
    report["image_rank"] = rank
    report["surjective"] = rank == E.dim
    if p3 is not None:
        report["associativity_defect"] = associativity_check(sg, p1, p2, p3)
    worst = max(report["inner_product_defect"], report["containment"], report.get("associativity_defect", 0.0))
    if worst > ISO_TOL or not report["surjective"]:
        raise IsoDefect(f"concatenation map is not an isomorphism: {report}", defect=worst)
    return report


def associativity_check(sg: SemigroupSpec, p1: Partition, p2: Partition, p3: Partition) -> float:
    """(X (x) Y) (x) Z against X (x) (Y (x) Z) on basis triples."""
    p12, p23 = concat(p1, p2), concat(p2, p3)
    full = concat(p12, p3)
    if full.endpoint > sg.horizon:
        raise GapExceedsHorizon(f"t + s + r = {full.endpoint} exceeds the horizon {sg.horizon}")
    E1, E2, E3 = (_corr(sg, q.gaps) for q in (p1, p2, p3))
    worst = 0.0
    for X in E1.basis:
        AX_s = amplify_prefix(sg, p2.gaps, (), p1.gaps, X)
        AX_sr = amplify_prefix(sg, p23.gaps, (), p1.gaps, X)
        for Y in E2.basis:
            U = AX_s @ Y
            AU = amplify_prefix(sg, p3.gaps, (), p12.gaps, U)
            AY = amplify_prefix(sg, p3.gaps, (), p2.gaps, Y)
            for Zb in E3.basis:
                left = AU @ Zb
                right = AX_sr @ (AY @ Zb)
                worst = max(worst, opnorm(left - right))
    return worst


# ---------------------------------------------------------------- representations

def identity_rep_at_partition(sg: SemigroupSpec, p: Partition,
                              report: Optional[Dict[str, float]] = None) -> CovariantRep:
    """T_t(X) = iota_p^* X on E(p), sigma the identity representation of M'."""
    pc = partition_correspondence(sg, p, check=False)
    iota = _iota(sg, p.gaps)
    rep = embedding_representation(pc.corr, iota)
    fine = Partition.finest(p.endpoint)
    v0 = refinement_isometry(sg, p, fine)
    consistency = opnorm(dag(_iota(sg, fine.gaps)) @ v0 - dag(iota))
    if report is not None:
        report["refinement_consistency"] = consistency
        report["iota_isometry"] = opnorm(dag(iota) @ iota - np.eye(iota.shape[1]))
    if consistency > REFINE_TOL:
        raise RepresentationDefect(f"iota_p^* != iota_fine^* v0 (defect {consistency:.3e})", defect=consistency)
    return rep


def implementation_defect(sg: SemigroupSpec, p: Partition) -> float:
    """||P_t - Theta_{T_t}|| on the basis of M, for the identity representation at p."""
    rep = identity_rep_at_partition(sg, p)
    theta = induced_cp_map(rep)
    return restricted_distance(theta, sg[p.endpoint], sg.generator.domain)


# ---------------------------------------------------------------- semigroup dilation

@dataclass(frozen=True, eq=False)
class GridDilation:
    """K truncated at grid time N: level s is H_s = H_{finest(s)}, u_s embeds H_s in H_N."""

    semigroup: SemigroupSpec
    depth: int

    def gaps(self, s: int) -> Tuple[int, ...]:
        return (1,) * s

    def dim(self, s: int) -> int:
        return _dim(self.semigroup, self.gaps(s))

    def u0(self, s: int) -> np.ndarray:
        return _iota(self.semigroup, self.gaps(s))

    def u(self, s: int, s2: int) -> np.ndarray:
        """u_{s, s2}: H_s -> H_{s2}, identities inserted on the left."""
        return left_insertion(self.semigroup, self.gaps(s), self.gaps(s2 - s))

    def corr(self, t: int) -> Correspondence:
        return _corr(self.semigroup, self.gaps(t))

    def rho(self, s: int) -> np.ndarray:
        return _mprime_rep(self.semigroup, self.gaps(s))

    def V(self, X: np.ndarray, t: int, s: int) -> np.ndarray:
        """V_t(X) restricted to level s: I_s (x) X from H_s to H_{s+t}."""
        return amplify_prefix(self.semigroup, self.gaps(s), (), self.gaps(t), X)

    def V_tilde(self, t: int, s: int) -> Tuple[np.ndarray, object]:
        """V~_t: E(t) (x)_rho H_s -> H_{s+t} and the quotient of E(t) (x)_rho H_s."""
        key = (t, s)
        cache = _cache(self.semigroup).setdefault("vtilde", {})
        if key not in cache:
            E = self.corr(t)
            gq = interior_quotient(E, self.rho(s))
            raw = np.concatenate([self.V(X, t, s) for X in E.basis], axis=1)
            cache[key] = (raw @ gq.lift, gq)
        return cache[key]

    def alpha(self, t: int, S: np.ndarray, s: int) -> np.ndarray:
        """alpha_t(S) = V~ (I (x) S) V~^* from operators on H_s to operators on H_{s+t}."""
        Vt, gq = self.V_tilde(t, s)
        m = self.corr(t).dim
        e, n = gq.embed.shape[0], S.shape[0]
        one = (gq.embed.reshape(e, m, n) @ S).reshape(e, -1) @ gq.lift
        return Vt @ one @ dag(Vt)

    def commutant_samples(self, s: int, count: int, rng: np.random.Generator) -> List[np.ndarray]:
        over = _over(self.semigroup)
        rho = self.rho(s)
        rep = lambda R: np.tensordot(over.coefficients(R), rho, axes=(0, 0))
        corners = representation_corners(over.structure, rep)
        return [random_representation_commutant(over.structure, rep, rng, corners=corners)
                for _ in range(count)]


def semigroup_dilation_check(sg: SemigroupSpec, N: int, tol: float = DILATION_TOL,
                             samples: int = 3) -> Dict[str, object]:
    if N > sg.horizon:
        raise GapExceedsHorizon(f"grid time {N} exceeds the horizon {sg.horizon}")
    M = sg.generator.domain
    dil = GridDilation(sg, N)
    rng = np.random.default_rng(_SAMPLE_SEED)
    clauses = {k: 0.0 for k in ("a_compression", "b_invariance", "c_relative_commutant", "d_powers",
                                "e_corner", "unitary_V", "increasing_projection", "semigroup_law",
                                "multiplicativity")}
    for t in range(1, N + 1):
        E = dil.corr(t)
        Pt = sg[t]
        iota_t = dil.u0(t)
        T_t = np.einsum("ax,iab->ixb", np.conj(iota_t), E.basis)
        for s in range(0, N - t + 1):
            u_s, u_st = dil.u0(s), dil.u0(s + t)
            proj = np.eye(dil.dim(s)) - u_s @ dag(u_s)
            for X, TX in zip(E.basis, T_t):
                Vx = dil.V(X, t, s)
                clauses["a_compression"] = max(clauses["a_compression"], opnorm(dag(u_st) @ Vx @ u_s - TX))
                clauses["b_invariance"] = max(clauses["b_invariance"], opnorm(proj @ dag(Vx) @ u_st))
            Vt, _ = dil.V_tilde(t, s)
            clauses["unitary_V"] = max(clauses["unitary_V"], opnorm(dag(Vt) @ Vt - np.eye(Vt.shape[1])),
                                       opnorm(Vt @ dag(Vt) - np.eye(Vt.shape[0])))
            for T in M.basis:
                lhs = Pt(T)
                rhs = dag(u_st) @ dil.alpha(t, u_s @ T @ dag(u_s), s) @ u_st
                clauses["d_powers"] = max(clauses["d_powers"], opnorm(lhs - rhs))
            gens = dil.commutant_samples(s, samples, rng) + [u_s @ dag(u_s), np.eye(dil.dim(s))]
            imgs = [dil.alpha(t, S, s) for S in gens]
            for S, A in zip(gens, imgs):
                clauses["c_relative_commutant"] = max(clauses["c_relative_commutant"],
                                                      opnorm(Pt(dag(u_s) @ S @ u_s) - dag(u_st) @ A @ u_st))
            clauses["increasing_projection"] = max(clauses["increasing_projection"],
                                                   opnorm(dag(u_st) @ imgs[-2] - dag(u_st)))
            for i, Si in enumerate(gens[:samples]):
                for j, Sj in enumerate(gens[:samples]):
                    clauses["multiplicativity"] = max(clauses["multiplicativity"],
                                                      opnorm(imgs[i] @ imgs[j] - dil.alpha(t, Si @ Sj, s)))
            # alpha_{t'} o alpha_t = alpha_{t + t'} from level s
            for t2 in range(1, N - s - t + 1):
                for S in gens[:samples]:
                    two = dil.alpha(t2, dil.alpha(t, S, s), s + t)
                    clauses["semigroup_law"] = max(clauses["semigroup_law"], opnorm(two - dil.alpha(t + t2, S, s)))
    uN = dil.u0(N)
    comps = [dag(uN) @ S @ uN for S in dil.commutant_samples(N, M.dim + 2, rng)]
    resid = max(contains(M, C)[1] for C in comps)
    span = span_dimension(comps)
    clauses["e_corner"] = max(resid, float(abs(span - M.dim)))
    report = {"depth": N, "level_dims": [dil.dim(s) for s in range(N + 1)], "clauses": clauses,
              "corner_span_dim": span, "algebra_dim": M.dim}
    for name, value in clauses.items():
        if value > tol:
            raise DilationDefect(f"clause {name} fails with defect {value:.3e}", defect=value, clause=name)
    return report


# ---------------------------------------------------------------- converse

def identity_rep_family(sg: SemigroupSpec, N: Optional[int] = None) -> List[CovariantRep]:
    """T_t at the finest partition of [0, t] for t = 0..N."""
    N = sg.horizon if N is None else N
    return [identity_rep_at_partition(sg, Partition.finest(t)) for t in range(N + 1)]


def scaled_family(family: Sequence[CovariantRep], c: float) -> List[CovariantRep]:
    """c T_t for every t; Theta_t becomes c^2 Theta_t, which breaks the semigroup law unless c = 1."""
    return [covariant_rep(r.corr, r.sigma, c * r.T_on_basis, check=False) for r in family]


def converse_semigroup_check(family: Sequence[CovariantRep], tol: float = SEMIGROUP_TOL) -> Dict[str, object]:
    """Theta_t(S) = T~_t (1 (x) S) T~_t^* must satisfy Theta_{t+s} = Theta_t o Theta_s."""
    thetas = [induced_cp_map(r) for r in family]
    N = len(thetas) - 1
    law = 0.0
    for t in range(N + 1):
        for s in range(N + 1 - t):
            law = max(law, restricted_distance(thetas[t + s], compose(thetas[t], thetas[s])))
    rows = []
    consistent = True
    for t, (r, th) in enumerate(zip(family, thetas)):
        d = th.d
        unital = opnorm(th(np.eye(d)) - np.eye(d)) <= tol
        coiso = coisometric_defect(r) <= tol
        mult = endomorphism_defect(th) <= 1e-8
        iso = isometric_defect(r) <= tol
        consistent &= (unital == coiso) and (not iso or mult)
        rows.append({"t": t, "unital": bool(unital), "fully_coisometric": bool(coiso),
                     "multiplicative": bool(mult), "isometric": bool(iso)})
    report = {"semigroup_defect": law, "rows": rows, "consistent": bool(consistent)}
    if law > tol:
        raise SemigroupDefect(f"Theta_(t+s) != Theta_t o Theta_s (defect {law:.3e})", defect=law)
    return report
