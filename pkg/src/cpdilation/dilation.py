"""Minimal isometric dilation of a covariant representation, truncated at depth N.

Tower model: K = H + D + E(x)D + E(x)E(x)D + ..., where D is the range of
Delta = (I - T~^* T~)^{1/2} inside E (x)_sigma H.  ``V~`` maps E (x) level l onto
level l + 1 (with T~ and Delta in the first column), so operators on levels
0..k are sent to operators on levels 0..k+1 and nothing is ever truncated.

Inductive model: H_k = M (x)_P H_{k-1}, iota_k inserts an identity on the
left, and an intertwiner X acts as I (x) ... (x) I (x) X.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .algebra import (MatrixAlgebra, contains, random_representation_commutant, representation_corners,
                      span_dimension)
from .correspondence import arveson
from .covrep import CovariantRep, coisometric_defect, identity_representation, interior_quotient
from .cpmap import CpMap, power
from .errors import NotPSD, DilationDefect, ModelMismatch, NotInRelativeCommutant
from .numerics import block_diag, dag, fix_phases, hermitian_part, opnorm, range_basis, rank_tol
from .stinespring import TensorLayer, tensor_layer

DEFAULT_DEPTH = 4
TOWER_TOL = 1e-10
POWER_TOL = 1e-8
MOMENT_TOL = 1e-8
COMMUTANT_TOL = 1e-9
_SAMPLE_SEED = 7


@dataclass
class _Level:
    dim: int
    rep: np.ndarray  # (k', n, n) images of the basis of M'
    embed: Optional[np.ndarray] = None  # C^m (x) level -> E (x) level
    lift: Optional[np.ndarray] = None
    induced: Optional[np.ndarray] = None  # (k', e, e) phi(R) (x) I on E (x) level

    @property
    def edim(self) -> int:
        return 0 if self.embed is None else self.embed.shape[0]


@dataclass(frozen=True, eq=False)
class DilationTower:
    base: CovariantRep
    depth: int
    levels: List[int]
    delta: np.ndarray
    D: np.ndarray  # orthonormal basis of range(Delta) in E (x)_sigma H
    V_tilde_blocks: List[np.ndarray]  # V~_k: E (x) K_k -> K_{k+1}, k = 0..N-1
    rho: List[np.ndarray]  # rho_k: (k', dim K_k, dim K_k)
    W: np.ndarray  # H -> K_N
    _raw: List[tuple] = field(repr=False)  # (embed, lift) of E (x) K_k
    _induced: List[np.ndarray] = field(repr=False)

    @property
    def m(self) -> int:
        return self.base.corr.dim

    def dim_K(self, k: int) -> int:
        return sum(self.levels[: k + 1])

    def W_at(self, k: int) -> np.ndarray:
        return self.W[: self.dim_K(k)]

    def rho_of(self, R: np.ndarray, k: int) -> np.ndarray:
        return np.tensordot(self.base.over.coefficients(R), self.rho[k], axes=(0, 0))

    def one_tensor(self, S: np.ndarray, k: int) -> np.ndarray:
        embed, lift = self._raw[k]
        e, n = embed.shape[0], S.shape[0]
        # embed @ kron(I_m, S) without forming the Kronecker product
        return (embed.reshape(e, self.m, n) @ S).reshape(e, -1) @ lift

    def V(self, X: np.ndarray, k: int) -> np.ndarray:
        """V(X): K_k -> K_{k+1}."""
        return np.tensordot(self.base.corr.coefficients(X), self.V_on_basis(k), axes=(0, 0))

    def V_on_basis(self, k: int) -> np.ndarray:
        """(m, dim K_{k+1}, dim K_k): V(X_i) = V~ (X_i (x) .)."""
        embed, _ = self._raw[k]
        n = self.dim_K(k)
        cols = embed.reshape(embed.shape[0], self.m, n)
        return np.stack([self.V_tilde_blocks[k] @ cols[:, i, :] for i in range(self.m)])

    def in_relative_commutant(self, S: np.ndarray, k: int) -> float:
        # Frobenius norm bounds the operator norm and avoids an SVD per generator
        return max((float(np.linalg.norm(S @ r - r @ S)) for r in self.rho[k]), default=0.0)

    def theta(self, S: np.ndarray, k: int) -> np.ndarray:
        return induced_endomorphism_step(self, S, k)


def _level_tensor(base: CovariantRep, lev: _Level) -> None:
    corr = base.corr
    if lev.dim == 0:
        lev.embed = np.zeros((0, 0), dtype=complex)
        lev.lift = np.zeros((0, 0), dtype=complex)
        lev.induced = np.zeros((corr.over.dim, 0, 0), dtype=complex)
        return
    gq = interior_quotient(corr, lev.rep)
    lev.embed, lev.lift = gq.embed, gq.lift
    eye = np.eye(lev.dim)
    lev.induced = np.stack([gq.embed @ np.kron(corr.left_matrix(R), eye) @ gq.lift for R in corr.over.basis])


def _interleave(levels: List[_Level], m: int) -> tuple:
    """Embed/lift of E (x) K for K = sum of levels, raw index (i, global x)."""
    n = sum(l.dim for l in levels)
    e = sum(l.edim for l in levels)
    embed = np.zeros((e, m, n), dtype=complex)
    lift = np.zeros((m, n, e), dtype=complex)
    r = c = 0
    for l in levels:
        if l.dim:
            embed[r:r + l.edim, :, c:c + l.dim] = l.embed.reshape(l.edim, m, l.dim)
            lift[:, c:c + l.dim, r:r + l.edim] = l.lift.reshape(m, l.dim, l.edim)
        r += l.edim
        c += l.dim
    return embed.reshape(e, m * n), lift.reshape(m * n, e)


def defect_operator(t: np.ndarray, tol: Optional[float] = None) -> tuple:
    """Delta = (I - t^* t)^{1/2} and an orthonormal basis of its range.

    Eigenvalues of Delta^2 below the rank tolerance are set to zero before the
    square root, otherwise roundoff of size eps would show up as sqrt(eps).
    """
    tol = rank_tol() if tol is None else tol
    e = t.shape[1]
    w, U = np.linalg.eigh(hermitian_part(np.eye(e) - dag(t) @ t))
    if e and w[0] < -tol:
        raise NotPSD(f"t is not a contraction (I - t*t has eigenvalue {w[0]:.3e})", defect=float(-w[0]))
    w = np.where(w > tol, w, 0.0)
    keep = np.nonzero(w)[0][::-1]
    delta = (U * np.sqrt(w)) @ dag(U)
    return delta, fix_phases(U[:, keep])


def build_tower(rep: CovariantRep, N: int = DEFAULT_DEPTH) -> DilationTower:
    if N < 1:
        raise ValueError("depth must be at least 1")
    m = rep.corr.dim
    n0 = rep.rep_space_dim
    t = rep.t_tilde
    e0 = t.shape[1]
    delta, D = defect_operator(t)
    levels = [_Level(n0, rep.sigma)]
    _level_tensor(rep, levels[0])
    n1 = D.shape[1]
    levels.append(_Level(n1, np.einsum("ax,kab,by->kxy", np.conj(D), levels[0].induced, D)))
    for l in range(1, N):
        _level_tensor(rep, levels[l])
        if l + 1 <= N:
            prev = levels[l]
            levels.append(_Level(prev.edim, prev.induced))
    dims = [l.dim for l in levels[: N + 1]]
    blocks, raws, induced, rhos = [], [], [], []
    for k in range(N + 1):
        rhos.append(np.stack([block_diag(*[lv.rep[j] for lv in levels[: k + 1]])
                              for j in range(rep.over.dim)]))
    for k in range(N):
        raws.append(_interleave(levels[: k + 1], m))
        induced.append(np.stack([block_diag(*[lv.induced[j] for lv in levels[: k + 1]])
                                 for j in range(rep.over.dim)]))
        rows = sum(dims[: k + 2])
        cols = sum(levels[l].edim for l in range(k + 1))
        Vt = np.zeros((rows, cols), dtype=complex)
        Vt[:n0, :e0] = t
        Vt[n0:n0 + n1, :e0] = dag(D) @ delta
        r, c = n0 + n1, e0
        for l in range(1, k + 1):
            e = levels[l].edim
            Vt[r:r + e, c:c + e] = np.eye(e)
            r += e
            c += e
        blocks.append(Vt)
    W = np.zeros((sum(dims), n0), dtype=complex)
    W[:n0] = np.eye(n0)
    tower = DilationTower(rep, N, dims, delta, D, blocks, rhos, W, raws, induced)
    defects = tower_defects(tower)
    bad = {k: v for k, v in defects.items() if v > TOWER_TOL}
    if bad:
        raise DilationDefect(f"tower invariants fail: {bad}", defect=max(bad.values()))
    return tower


def tower_defects(tower: DilationTower) -> Dict[str, float]:
    rep = tower.base
    N = tower.depth
    out = {}
    out["isometry"] = max(opnorm(dag(V) @ V - np.eye(V.shape[1])) for V in tower.V_tilde_blocks)
    V0 = tower.V_on_basis(0)
    W0 = tower.W_at(0)
    out["compression"] = max((opnorm(dag(tower.W_at(1)) @ V0[i] @ W0 - rep.T_on_basis[i])
                              for i in range(tower.m)), default=0.0)
    k = N - 1
    Vk = tower.V_on_basis(k)
    Wk, Wk1 = tower.W_at(k), tower.W_at(k + 1)
    proj = np.eye(Wk.shape[0]) - Wk @ dag(Wk)
    out["invariance"] = max((opnorm(proj @ dag(Vk[i]) @ Wk1) for i in range(tower.m)), default=0.0)
    out["isometric_rep"] = dilation_isometric_defect(tower)
    cov = 0.0
    for k in range(N):
        for j in range(rep.over.dim):
            cov = max(cov, opnorm(tower.V_tilde_blocks[k] @ tower._induced[k][j]
                                  - tower.rho[k + 1][j] @ tower.V_tilde_blocks[k]))
    out["covariance"] = cov
    if coisometric_defect(rep) <= COMMUTANT_TOL:
        out["coisometric_t_delta"] = opnorm(rep.t_tilde @ tower.delta)
        out["coisometric_V"] = max(opnorm(V @ dag(V) - np.eye(V.shape[0])) for V in tower.V_tilde_blocks)
    return out


def dilation_isometric_defect(tower: DilationTower) -> float:
    """max ||V(X_i)^* V(X_j) - rho(<X_i, X_j>)|| on K_{N-1}."""
    k = tower.depth - 1
    Vk = tower.V_on_basis(k)
    gram = tower.base.corr.gram
    worst = 0.0
    for i in range(tower.m):
        for j in range(tower.m):
            worst = max(worst, opnorm(dag(Vk[i]) @ Vk[j] - tower.rho_of(gram[i, j], k)))
    return worst


def induced_endomorphism_step(tower: DilationTower, S: np.ndarray, k: int) -> np.ndarray:
    """Theta_V(S) = V~(I (x) S)V~^* from operators on K_k to operators on K_{k+1}."""
    if not 0 <= k < tower.depth:
        raise ValueError(f"level {k} outside 0..{tower.depth - 1}")
    S = np.asarray(S, dtype=complex)
    res = tower.in_relative_commutant(S, k)
    if res > COMMUTANT_TOL * max(1.0, opnorm(S)):
        raise NotInRelativeCommutant(f"operator does not commute with rho(M') (residual {res:.3e})",
                                     defect=res, level=k)
    Vt = tower.V_tilde_blocks[k]
    return Vt @ tower.one_tensor(S, k) @ dag(Vt)


def theta_power(tower: DilationTower, S: np.ndarray, k: int, n: int) -> np.ndarray:
    for j in range(n):
        S = induced_endomorphism_step(tower, S, k + j)
    return S


def minimality_rank(tower: DilationTower) -> Dict[str, int]:
    """Rank of the span of V-words applied to W(H), level by level."""
    B = tower.W_at(0)
    for k in range(tower.depth):
        Vk = tower.V_on_basis(k)
        pad = np.zeros((tower.dim_K(k + 1), B.shape[1]), dtype=complex)
        pad[: B.shape[0]] = B
        B = range_basis(np.concatenate([pad] + [v @ B for v in Vk], axis=1), scale=1.0).basis
    return {"span_rank": B.shape[1], "tower_dim": tower.dim_K(tower.depth)}


def relative_commutant_samples(tower: DilationTower, k: int, count: int,
                               rng: np.random.Generator) -> List[np.ndarray]:
    structure = tower.base.over.structure
    rep = lambda R: tower.rho_of(R, k)
    corners = representation_corners(structure, rep)
    return [random_representation_commutant(structure, rep, rng, corners=corners) for _ in range(count)]


def power_dilation_check(P: CpMap, N: int = DEFAULT_DEPTH, tol: float = POWER_TOL,
                         samples: int = 3) -> Dict[str, object]:
    """Powers of P against compressions of powers of Theta_V on the dilation of the identity rep."""
    M = P.domain
    E = arveson(P)
    rep = identity_representation(E)
    tower = build_tower(rep, N)
    rng = np.random.default_rng(_SAMPLE_SEED)
    W0 = tower.W_at(0)
    table = []
    Pn = P
    for n in range(1, N + 1):
        if n > 1:
            Pn = power(P, n)
        worst, worst_T = 0.0, None
        for idx, T in enumerate(M.basis):
            S = theta_power(tower, W0 @ T @ dag(W0), 0, n)
            d = opnorm(Pn(T) - dag(tower.W_at(n)) @ S @ tower.W_at(n))
            if d > worst:
                worst, worst_T = d, idx
        # increasing projection, starting from WW^* on every admissible level
        proj = 0.0
        for j in range(0, N - n + 1):
            Wj = tower.W_at(j)
            S = theta_power(tower, Wj @ dag(Wj), j, n)
            proj = max(proj, opnorm(dag(tower.W_at(j + n)) @ S - dag(tower.W_at(j + n))))
        # second identity on sampled elements of the truncated relative commutant
        second = 0.0
        j = N - n
        Wj = tower.W_at(j)
        gens = relative_commutant_samples(tower, j, samples, rng) + [np.eye(Wj.shape[0]), Wj @ dag(Wj)]
        for S in gens:
            lhs = Pn(dag(Wj) @ S @ Wj)
            rhs = dag(tower.W_at(N)) @ theta_power(tower, S, j, n) @ tower.W_at(N)
            second = max(second, opnorm(lhs - rhs))
        table.append({"n": n, "power_defect": worst, "worst_basis_index": worst_T,
                      "increasing_projection": proj, "second_identity": second})
        if worst > tol:
            raise DilationDefect(f"P^{n}(T) != W* Theta^{n}(W T W*) W (defect {worst:.3e})",
                                 defect=worst, n=n, T=worst_T)
        if proj > TOWER_TOL:
            raise DilationDefect(f"W* Theta^{n}(WW*) != W* (defect {proj:.3e})", defect=proj, n=n)
        if second > tol:
            raise DilationDefect(f"P^{n}(W*SW) != W* Theta^{n}(S) W (defect {second:.3e})", defect=second, n=n)
    corner = corner_check(tower, M, rng, samples=M.dim + 2)
    if not corner["equal"]:
        raise DilationDefect(f"W* R W differs from M: {corner}", defect=corner["containment_residual"])
    endo = endomorphism_check(tower, rng, samples)
    if endo > tol:
        raise DilationDefect(f"Theta_V is not multiplicative (defect {endo:.3e})", defect=endo)
    mini = minimality_rank(tower)
    return {"levels": tower.levels, "table": table, "corner": corner, "endomorphism_defect": endo,
            "minimality": mini, "tower_defects": tower_defects(tower),
            "max_defect": max(max(r["power_defect"], r["second_identity"]) for r in table)}


def corner_check(tower: DilationTower, M: MatrixAlgebra, rng: np.random.Generator,
                 samples: int) -> Dict[str, object]:
    """span{W^* S W : S in rho(M')' on K_N} against M, from random elements."""
    N = tower.depth
    W = tower.W_at(N)
    comps = [dag(W) @ S @ W for S in relative_commutant_samples(tower, N, samples, rng)]
    resid = max(contains(M, C)[1] for C in comps)
    dim = span_dimension(comps)
    return {"span_dim": dim, "algebra_dim": M.dim, "containment_residual": resid,
            "equal": dim == M.dim and resid <= COMMUTANT_TOL}


def endomorphism_check(tower: DilationTower, rng: np.random.Generator, samples: int) -> float:
    worst = 0.0
    for k in range(tower.depth):
        gens = relative_commutant_samples(tower, k, samples, rng)
        imgs = [tower.theta(S, k) for S in gens]
        for a, Sa in enumerate(gens):
            for b, Sb in enumerate(gens):
                worst = max(worst, opnorm(imgs[a] @ imgs[b] - tower.theta(Sa @ Sb, k)))
    return worst


# ---------------------------------------------------------------- inductive model

@dataclass(frozen=True, eq=False)
class InductiveModel:
    source: CpMap
    depth: int
    layers: List[TensorLayer]  # layers[k-1] realises H_k = M (x)_P H_{k-1}
    iota: List[np.ndarray]  # iota_k: H_k -> H_{k+1}
    X: List[np.ndarray]  # X[k]: (m, dim H_{k+1}, dim H_k)
    rho: List[np.ndarray]  # rho[k]: (k', dim H_k, dim H_k)
    over: MatrixAlgebra
    corr_basis: np.ndarray
    T_on_basis: np.ndarray

    @property
    def dims(self) -> List[int]:
        return [self.source.d] + [layer.dim for layer in self.layers]


def build_inductive_model(P: CpMap, N: int = DEFAULT_DEPTH) -> InductiveModel:
    if N < 1:
        raise ValueError("depth must be at least 1")
    E = arveson(P)
    over = E.corr.over
    layers = [E.triple.layer]
    for _ in range(N):
        layers.append(tensor_layer(P, layers[-1].rep))
    iota = [layer.insert_identity() for layer in layers]
    X = [E.corr.basis]
    for k in range(1, N + 1):
        X.append(np.stack([layers[k].amplify(x, layers[k - 1]) for x in X[-1]]))
    rho = [over.basis]
    for k in range(1, N + 1):
        src = layers[k - 1]
        rho.append(np.stack([src.amplify(r, src) for r in rho[-1]]))
    model = InductiveModel(P, N, layers[:N], iota[:N], X[:N], rho, over, E.corr.basis, E.phi_map)
    defects = inductive_defects(model, X, iota)
    bad = {k: v for k, v in defects.items() if v > TOWER_TOL}
    if bad:
        raise DilationDefect(f"inductive model invariants fail: {bad}", defect=max(bad.values()))
    return model


def inductive_defects(model: InductiveModel, X: Optional[List[np.ndarray]] = None,
                      iota: Optional[List[np.ndarray]] = None) -> Dict[str, float]:
    X = model.X if X is None else X
    iota = model.iota if iota is None else iota
    out = {"iota_isometry": max(opnorm(dag(i) @ i - np.eye(i.shape[1])) for i in iota)}
    diag = 0.0
    for k in range(min(len(X) - 1, len(iota) - 1)):
        for a in range(len(model.corr_basis)):
            diag = max(diag, opnorm(X[k + 1][a] @ iota[k] - iota[k + 1] @ X[k][a]))
    out["diagram"] = diag
    iso = 0.0
    for k in range(model.depth):
        for a, Xa in enumerate(model.corr_basis):
            for b, Xb in enumerate(model.corr_basis):
                r = np.tensordot(model.over.coefficients(dag(Xa) @ Xb), model.rho[k], axes=(0, 0))
                iso = max(iso, opnorm(dag(model.X[k][a]) @ model.X[k][b] - r))
    out["isometric"] = iso
    out["compression"] = max((opnorm(dag(iota[0]) @ x - t) for x, t in zip(X[0], model.T_on_basis)),
                             default=0.0)
    return out


def _tower_moments(tower: DilationTower, L: int) -> Dict[tuple, np.ndarray]:
    out = {}
    V = [tower.V_on_basis(k) for k in range(L)]
    frontier = {(): tower.W_at(0)}
    for k in range(L):
        nxt = {}
        for word, v in frontier.items():
            for i in range(tower.m):
                # the newest letter is applied last, i.e. it is the leftmost factor
                nxt[(i,) + word] = V[k][i] @ v
        frontier = nxt
        Wk = tower.W_at(k + 1)
        out.update({w: dag(Wk) @ v for w, v in frontier.items()})
    return out


def _inductive_moments(model: InductiveModel, L: int) -> Dict[tuple, np.ndarray]:
    out = {}
    frontier = {(): np.eye(model.source.d, dtype=complex)}
    chain = np.eye(model.source.d, dtype=complex)  # iota_{k-1} ... iota_0
    for k in range(L):
        chain = model.iota[k] @ chain
        nxt = {}
        for word, v in frontier.items():
            for i in range(len(model.corr_basis)):
                nxt[(i,) + word] = model.X[k][i] @ v
        frontier = nxt
        out.update({w: dag(chain) @ v for w, v in frontier.items()})
    return out


def cross_validate_models(P: CpMap, N: int = DEFAULT_DEPTH, tol: float = MOMENT_TOL) -> Dict[str, object]:
    """Compressed V-word moments of the tower against the inductive model and against T-words."""
    L = min(3, N)
    E = arveson(P)
    tower = build_tower(identity_representation(E), L)
    model = build_inductive_model(P, L)
    a = _tower_moments(tower, L)
    b = _inductive_moments(model, L)
    T = model.T_on_basis
    worst = oracle = 0.0
    for word, x in a.items():
        worst = max(worst, opnorm(x - b[word]))
        t = np.eye(P.d, dtype=complex)
        for i in word:
            t = t @ T[i]
        oracle = max(oracle, opnorm(x - t))
    report = {"words": len(a), "max_length": L, "model_difference": worst, "oracle_difference": oracle,
              "tower_levels": tower.levels, "inductive_dims": model.dims}
    if worst > tol:
        raise ModelMismatch(f"tower and inductive moments differ by {worst:.3e}", defect=worst)
    return report
