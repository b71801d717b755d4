"""Small worked cases for every module, checked against hand computations or brute-force oracles."""
import numpy as np
import pytest

from cpdilation import correspondence as C
from cpdilation import covrep, dilation, prodsys, stinespring
from cpdilation.algebra import commutant, contains, diagonal_algebra, from_generators, full_algebra, scalar_algebra
from cpdilation.cpmap import (PAULI, compose, depolarizing, endomorphism_defect, from_choi, from_kraus,
                              identity_map, is_endomorphism, mixed_unitary, random_channel, random_unitary,
                              semigroup, superop_distance, unitary_conjugation)
from cpdilation.errors import NotPSD, SemigroupDefect
from cpdilation.numerics import gram_quotient_basis, null_space, psd_sqrt
from cpdilation.prodsys import Partition

RNG = np.random.default_rng(77)
U = random_unitary(2, RNG)
V = random_unitary(2, RNG)
ID2 = identity_map(full_algebra(2))


# ---------------------------------------------------------------- numerics

def test_null_space_small_cases():
    assert null_space(np.eye(2)).rank == 0
    assert null_space(np.zeros((2, 2)), scale=1.0).rank == 2
    ns = null_space(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert ns.rank == 1
    v = ns.basis[:, 0]
    assert np.isclose(abs(np.vdot(v, np.array([1, -1]) / np.sqrt(2))), 1.0)


def test_gram_quotient_small_cases():
    assert gram_quotient_basis(np.eye(4))[1] == 4
    assert gram_quotient_basis(np.diag([1.0, 1.0, 0.0, 0.0]))[1] == 2
    # the identity channel collapses M (x) C^2 to C^2
    assert stinespring.tensor_layer(ID2, full_algebra(2).basis).dim == 2


def test_psd_sqrt_small_cases(rng):
    assert np.allclose(psd_sqrt(np.eye(2)), np.eye(2))
    assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    rep = covrep.identity_representation(C.arveson(random_channel(2, 3, rng)))
    t = rep.t_tilde
    delta = psd_sqrt(np.eye(t.shape[1]) - t.conj().T @ t)
    assert np.linalg.norm(t @ delta, 2) <= 1e-10


# ---------------------------------------------------------------- algebra

def test_generated_algebras():
    assert from_generators(2, []).dim == 1
    assert from_generators(2, [PAULI["X"], PAULI["Z"]]).dim == 4
    assert from_generators(2, [np.diag([1.0, 0.0])]).dim == 2


def test_commutants():
    assert commutant(full_algebra(2)).algebra.dim == 1
    D = commutant(diagonal_algebra(2)).algebra
    assert D.dim == 2 and all(np.allclose(B, np.diag(np.diag(B))) for B in D.basis)
    assert commutant(scalar_algebra(2)).algebra.dim == 4


def test_membership(rng):
    assert contains(diagonal_algebra(3), np.eye(3))[0]
    ok, res = contains(diagonal_algebra(2), PAULI["X"])
    assert not ok and np.isclose(res, 1.0)
    # Kraus operators from M' = diagonal: P preserves M = diagonal algebra
    P = mixed_unitary([0.3, 0.7], [np.eye(2), PAULI["Z"]], diagonal_algebra(2))
    T = np.diag(rng.standard_normal(2))
    ok, _ = contains(P.domain, P(T))
    assert ok and np.allclose(P(T), np.diag(np.diag(P(T))))


# ---------------------------------------------------------------- cpmap

def test_kraus_constructions():
    assert superop_distance(from_kraus(full_algebra(2), [np.eye(2)]), ID2) == 0.0
    p = 0.4
    ops = [np.sqrt(1 - 3 * p / 4) * np.eye(2)] + [np.sqrt(p) / 2 * PAULI[k] for k in "XYZ"]
    P = from_kraus(full_algebra(2), ops)
    assert superop_distance(P, depolarizing(p)) <= 1e-12
    assert int(np.sum(np.linalg.eigvalsh(P.choi) > 1e-9)) == 4
    assert is_endomorphism(unitary_conjugation(U))


def test_composition_rules():
    P = depolarizing(0.3)
    assert superop_distance(compose(P, ID2), P) <= 1e-14
    assert superop_distance(compose(depolarizing(0.2), depolarizing(0.3)), depolarizing(1 - 0.8 * 0.7)) <= 1e-12
    # Ad_U(Ad_V(T)) = U^* V^* T V U, which is Ad_{VU} in the T -> W^* T W convention
    assert superop_distance(compose(unitary_conjugation(U), unitary_conjugation(V)),
                            unitary_conjugation(V @ U)) <= 1e-12


def test_endomorphism_cases():
    assert is_endomorphism(ID2)
    P = depolarizing(0.5)
    assert not is_endomorphism(P)
    X, Z = PAULI["X"], PAULI["Z"]
    assert np.linalg.norm(P(X @ Z) - P(X) @ P(Z), 2) > 0.1


def test_semigroup_cases():
    assert all(superop_distance(m, ID2) == 0.0 for m in semigroup(ID2, 5).maps)
    sg = semigroup(depolarizing(0.3), 3)
    for t in range(4):
        assert superop_distance(sg[t], depolarizing(1 - 0.7 ** t)) <= 1e-12
    sgu = semigroup(unitary_conjugation(U), 4)
    for t in range(5):
        assert superop_distance(sgu[t], unitary_conjugation(np.linalg.matrix_power(U, t))) <= 1e-12


def test_choi_perturbation_triggers_not_psd():
    C0 = depolarizing(0.0).choi
    with pytest.raises(NotPSD):
        from_choi(full_algebra(2), C0 - 2e-9 * np.eye(4))


# ---------------------------------------------------------------- stinespring

def test_stinespring_small_cases():
    t = stinespring.build(ID2)
    assert t.dil_dim == 2
    assert stinespring.build(depolarizing(0.5)).dil_dim == 8
    ta = stinespring.build(unitary_conjugation(U))
    T = RNG.standard_normal((2, 2))
    assert ta.dil_dim == 2
    assert np.allclose(ta.compress(T), U.conj().T @ T @ U, atol=1e-12)


def test_w_adjoint_small_cases(rng):
    P = depolarizing(0.3)
    t = stinespring.build(P)
    h = rng.standard_normal(2) + 0j
    assert np.allclose(stinespring.w_adjoint(t, np.eye(2), h), h)
    assert np.allclose(stinespring.w_adjoint(t, np.zeros((2, 2)), h), 0)
    X = rng.standard_normal((2, 2))
    assert np.allclose(stinespring.w_adjoint(t, X, h), (P.superop @ X.reshape(-1)).reshape(2, 2) @ h)


def test_cyclic_closure_small_cases():
    for P, dim in ((ID2, 2), (depolarizing(0.5), 8), (unitary_conjugation(U), 2)):
        t = stinespring.build(P)
        cert = stinespring.minimality_certificate(t)
        assert cert["closure_dim"] == dim
    assert stinespring.minimality_certificate(stinespring.build(ID2))["history"] == [2]


# ---------------------------------------------------------------- correspondence

def test_intertwiner_spaces():
    M = full_algebra(2)
    assert len(C.unit_intertwiner_basis(M, M.basis)) == 1
    S = scalar_algebra(2)
    assert len(C.intertwiner_space(S, S.basis).basis) == 4
    assert C.arveson(depolarizing(0.5)).dim == 4


def test_arveson_small_cases():
    E = C.arveson(ID2)
    assert E.dim == 1 and np.allclose(E.corr.basis[0] @ E.corr.basis[0].conj().T * 2, np.eye(2))
    Ea = C.arveson(unitary_conjugation(U))
    assert Ea.dim == 1
    # Y = W^* X is proportional to U^* (so that Phi_Y^* intertwines T with U^* T U)
    Y = Ea.phi_map[0]
    ratio = Y @ U
    assert np.allclose(ratio, ratio[0, 0] * np.eye(2), atol=1e-10)


def test_density_small_cases():
    assert C.density_check(C.arveson(ID2).corr)["rank"] == 2
    assert C.density_check(C.arveson(depolarizing(0.5)).corr)["rank"] == 8
    # two-step space: ranges of (I (x) X) Y span M (x)_Q M (x)_P H
    P, Q = depolarizing(0.5), random_channel(2, 2, np.random.default_rng(0))
    data = C.psi_data(C.arveson(P), C.arveson(Q), C.arveson(compose(P, Q)))
    pairs = data.psi_pairs.reshape(-1, *data.psi_pairs.shape[2:])
    assert np.linalg.matrix_rank(np.concatenate(list(pairs), axis=1), tol=1e-9) == data.outer.dim


def test_tensor_small_cases():
    assert C.tensor(C.arveson(ID2).corr, C.arveson(ID2).corr).dim == 1
    Eu, Ev = C.arveson(unitary_conjugation(U)), C.arveson(unitary_conjugation(V))
    assert C.tensor(Eu.corr, Ev.corr).dim == 1
    m = C.multiplication_map(Eu, Ev, C.arveson(compose(unitary_conjugation(U), unitary_conjugation(V))))
    assert m.isometry_defect <= 1e-10 and m.coisometry_defect <= 1e-10
    EP, EQ = C.arveson(depolarizing(0.5)), C.arveson(depolarizing(0.3))
    assert C.tensor(EP.corr, EQ.corr).dim == 16


def test_multiplication_small_cases():
    E = C.arveson(ID2)
    m = C.multiplication_map(E, E, E)
    assert m.matrix.shape == (1, 1) and np.isclose(abs(m.matrix[0, 0]), 1.0)
    Q = random_channel(2, 3, RNG)
    A = unitary_conjugation(U)
    EAQ = C.arveson(compose(A, Q))
    m = C.multiplication_map(C.arveson(A), C.arveson(Q), EAQ)
    assert m.kernel_dim == 0 and m.range_dim == EAQ.dim and m.isometry_defect <= 1e-10
    P = depolarizing(0.5)
    m = C.multiplication_map(C.arveson(P), C.arveson(P), C.arveson(compose(P, P)))
    assert (m.domain_dim, m.range_dim, m.kernel_dim) == (16, 4, 12) and m.coisometry_defect <= 1e-8


@pytest.mark.parametrize("case", ["identity", "depolarizing", "mixing"])
def test_conjugation_isomorphism(case):
    A, Ai = unitary_conjugation(U), unitary_conjugation(U.conj().T)
    if case == "identity":
        A = Ai = ID2
        P = depolarizing(0.3)
    elif case == "depolarizing":
        P = depolarizing(0.3)
    else:
        P = mixed_unitary([0.6, 0.4], [np.eye(2), random_unitary(2, np.random.default_rng(5))])
    r = C.conjugation_iso_check(P, A, Ai)
    assert r["gram_defect"] <= 1e-8
    assert r["dim_E_P"] == r["dim_triple_tensor"] == r["dim_image"]
    Q = compose(Ai, compose(P, A))
    if case == "depolarizing":
        assert superop_distance(Q, P) <= 1e-12  # depolarizing maps are unitarily covariant
    if case == "mixing":
        assert superop_distance(Q, P) > 1e-3


# ---------------------------------------------------------------- covrep

def test_identity_rep_small_cases():
    rep = covrep.identity_representation(C.arveson(ID2))
    t = rep.t_tilde
    assert np.allclose(t @ t.conj().T, np.eye(2)) and np.allclose(t.conj().T @ t, np.eye(t.shape[1]))
    repa = covrep.identity_representation(C.arveson(unitary_conjugation(U)))
    assert covrep.coisometric_defect(repa) <= 1e-12
    # T(X) = W^* X = Y, proportional to U^*
    ratio = repa.T_on_basis[0] @ U
    assert np.allclose(ratio, ratio[0, 0] * np.eye(2), atol=1e-10)
    assert covrep.coisometric_defect(covrep.identity_representation(C.arveson(depolarizing(0.5)))) <= 1e-10


def test_isometric_small_cases():
    assert covrep.is_isometric(covrep.identity_representation(C.arveson(ID2)))[0]
    ok, d = covrep.is_isometric(covrep.identity_representation(C.arveson(depolarizing(0.5))))
    assert not ok and d > 0.05
    tower = dilation.build_tower(covrep.identity_representation(C.arveson(depolarizing(0.5))), 2)
    assert dilation.dilation_isometric_defect(tower) <= 1e-10


def test_coisometric_small_cases():
    base = covrep.identity_representation(C.arveson(random_channel(2, 2, RNG)))
    assert covrep.is_fully_coisometric(base)[0]
    assert not covrep.is_fully_coisometric(covrep.scaled(base, 0.5))[0]
    assert not covrep.is_fully_coisometric(covrep.scaled(base, 0.0))[0]


def test_induced_map_small_cases():
    P = depolarizing(0.3)
    rep = covrep.identity_representation(C.arveson(P))
    assert covrep.restricted_distance(covrep.induced_cp_map(rep), P) <= 1e-10
    iso = covrep.identity_representation(C.arveson(unitary_conjugation(U)))
    assert endomorphism_defect(covrep.induced_cp_map(iso)) <= 1e-10
    zero = covrep.scaled(rep, 0.0)
    theta = covrep.induced_cp_map(zero)
    assert np.allclose(theta.superop, 0)


def test_decomposition_small_cases():
    iso = covrep.identity_representation(C.arveson(unitary_conjugation(U)))
    dec = covrep.multiplicative_decomposition(iso)
    assert np.allclose(dec.projection, np.eye(1), atol=1e-8)
    # rank-one correspondence with T = 0: Theta = 0 is multiplicative and E1 = 0
    dec0 = covrep.multiplicative_decomposition(covrep.scaled(iso, 0.0))
    assert np.allclose(dec0.projection, 0, atol=1e-8)


# ---------------------------------------------------------------- dilation

def test_tower_small_cases():
    P = depolarizing(0.5)
    tower = dilation.build_tower(covrep.identity_representation(C.arveson(P)), 3)
    assert tower.levels[:2] == [2, 4 * 2 - 2]
    assert dilation.tower_defects(tower)["isometry"] <= 1e-10
    ta = dilation.build_tower(covrep.identity_representation(C.arveson(unitary_conjugation(U))), 3)
    assert ta.levels == [2, 0, 0, 0] and np.allclose(ta.delta, 0)
    assert np.allclose(ta.V_tilde_blocks[0], ta.base.t_tilde)


def test_theta_v_small_cases():
    P = depolarizing(0.3)
    tower = dilation.build_tower(covrep.identity_representation(C.arveson(P)), 2)
    assert np.allclose(tower.theta(np.eye(2), 0), np.eye(tower.dim_K(1)), atol=1e-10)
    W0, W1 = tower.W_at(0), tower.W_at(1)
    for T in P.domain.basis:
        assert np.allclose(W1.conj().T @ tower.theta(W0 @ T @ W0.conj().T, 0) @ W1, P(T), atol=1e-10)
    S = tower.theta(W0 @ W0.conj().T, 0)
    assert np.allclose(W1.conj().T @ S, W1.conj().T, atol=1e-10)


@pytest.mark.parametrize("P,bound", [(ID2, 1e-14), (unitary_conjugation(U), 1e-12), (depolarizing(0.3), 1e-8)],
                         ids=["id", "Ad", "dep"])
def test_power_check_small_cases(P, bound):
    r = dilation.power_dilation_check(P, 4)
    assert r["max_defect"] <= bound


def test_inductive_small_cases():
    m = dilation.build_inductive_model(ID2, 3)
    assert m.dims == [2, 2, 2, 2]
    assert all(np.allclose(i.conj().T @ i, np.eye(2)) and i.shape == (2, 2) for i in m.iota)
    ma = dilation.build_inductive_model(unitary_conjugation(U), 2)
    assert ma.dims == [2, 2, 2] and len(ma.corr_basis) == 1
    # depolarizing(0.5): dims [2, 8, rank of the two-step Gram]
    layer = stinespring.tensor_layer(depolarizing(0.5), stinespring.build(depolarizing(0.5)).pi_basis)
    G = layer.quotient.embed.conj().T @ layer.quotient.embed
    assert dilation.build_inductive_model(depolarizing(0.5), 2).dims == [2, 8, np.linalg.matrix_rank(G, tol=1e-9)]


@pytest.mark.parametrize("P,bound", [(ID2, 1e-14), (unitary_conjugation(U), 1e-12), (depolarizing(0.5), 1e-8)],
                         ids=["id", "Ad", "dep"])
def test_cross_validation_small_cases(P, bound):
    assert dilation.cross_validate_models(P, 3)["model_difference"] <= bound


# ---------------------------------------------------------------- prodsys

def test_partition_space_small_cases():
    P = depolarizing(0.5)
    sg = semigroup(P, 3)
    assert prodsys.build_partition_space(sg, Partition.trivial(2)).dim == stinespring.build(sg[2]).dil_dim
    sga = semigroup(unitary_conjugation(U), 3)
    for p in prodsys.all_partitions(3):
        assert prodsys.build_partition_space(sga, p).dim == 2
    assert prodsys.build_partition_space(sg, Partition.of([0, 1, 2])).dim == 32


def test_refinement_small_cases():
    sg = semigroup(depolarizing(0.5), 2)
    p = Partition.of([0, 1, 2])
    assert np.allclose(prodsys.refinement_isometry(sg, p, p), np.eye(32))
    v = prodsys.refinement_isometry(sg, Partition.trivial(2), p)
    assert v.shape == (32, 8)
    sga = semigroup(unitary_conjugation(U), 2)
    va = prodsys.refinement_isometry(sga, Partition.trivial(2), p)
    assert np.allclose(va.conj().T @ va, np.eye(2)) and np.allclose(va @ va.conj().T, np.eye(2))


def test_partition_correspondence_small_cases():
    sg = semigroup(depolarizing(0.5), 2)
    E2 = prodsys.partition_correspondence(sg, Partition.trivial(2))
    assert E2.dim == C.arveson(sg[2]).dim
    assert prodsys.partition_correspondence(sg, Partition.of([0, 1, 2])).dim == 16
    sga = semigroup(unitary_conjugation(U), 3)
    assert all(prodsys.partition_correspondence(sga, p).dim == 1 for p in prodsys.all_partitions(3))


def test_concat_small_cases():
    sg = semigroup(depolarizing(0.5), 3)
    c = prodsys.concat(Partition.trivial(2), Partition.trivial(1))
    assert c.points == (0, 1, 3)
    r = prodsys.concat_iso_check(sg, Partition.trivial(1), Partition.trivial(1))
    assert r["dims"] == [4, 4, 16] and r["inner_product_defect"] <= 1e-9
    sga = semigroup(unitary_conjugation(U), 2)
    assert prodsys.concat_iso_check(sga, Partition.trivial(1), Partition.trivial(1))["dims"] == [1, 1, 1]


def test_implementation_small_cases():
    sg = semigroup(depolarizing(0.5), 2)
    rep = prodsys.identity_rep_at_partition(sg, Partition.of([0, 1, 2]))
    theta = covrep.induced_cp_map(rep)
    assert covrep.restricted_distance(theta, compose(sg[1], sg[1])) <= 1e-10
    single = prodsys.identity_rep_at_partition(sg, Partition.trivial(2))
    direct = covrep.identity_representation(C.arveson(sg[2]))
    assert covrep.restricted_distance(covrep.induced_cp_map(single), covrep.induced_cp_map(direct)) <= 1e-10
    sga = semigroup(unitary_conjugation(U), 2)
    assert prodsys.identity_rep_at_partition(sga, Partition.finest(2)).corr.dim == 1


@pytest.mark.parametrize("P,bound", [(ID2, 1e-14), (unitary_conjugation(U), 1e-12), (depolarizing(0.3), 1e-8)],
                         ids=["id", "Ad", "dep"])
def test_semigroup_dilation_small_cases(P, bound):
    r = prodsys.semigroup_dilation_check(semigroup(P, 3), 3)
    assert max(r["clauses"].values()) <= bound


def test_converse_small_cases():
    sg = semigroup(depolarizing(0.3), 3)
    fam = prodsys.identity_rep_family(sg)
    for t, rep in enumerate(fam):
        assert covrep.restricted_distance(covrep.induced_cp_map(rep), sg[t]) <= 1e-10
    grid = prodsys.GridDilation(sg, 3)
    S1, S2 = grid.commutant_samples(0, 2, np.random.default_rng(0))
    a = grid.alpha(1, S1 @ S2, 0)
    assert np.allclose(a, grid.alpha(1, S1, 0) @ grid.alpha(1, S2, 0), atol=1e-9)
    with pytest.raises(SemigroupDefect) as info:
        prodsys.converse_semigroup_check(prodsys.scaled_family(fam, 0.9))
    assert info.value.defect > 0.1
