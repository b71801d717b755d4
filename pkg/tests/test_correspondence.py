import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpdilation import correspondence as C
from cpdilation import stinespring
from cpdilation.algebra import block_algebra, contains, diagonal_algebra, full_algebra
from cpdilation.cpmap import (PAULI, compose, depolarizing, from_kraus, mixed_unitary, random_channel,
                              random_unitary, unitary_conjugation)


def _same_span(A, B):
    a = A.reshape(len(A), -1)
    b = B.reshape(len(B), -1)
    r = np.linalg.matrix_rank
    return r(a, tol=1e-8) == r(b, tol=1e-8) == r(np.concatenate([a, b]), tol=1e-8)


def _dephasing():
    return mixed_unitary([0.3, 0.7], [np.eye(2), PAULI["Z"]], diagonal_algebra(2))


@given(st.integers(2, 3), st.integers(1, 4), st.integers(0, 2 ** 31))
def test_unit_basis_matches_kernel_oracle(d, r, seed):
    P = random_channel(d, r, np.random.default_rng(seed))
    t = stinespring.build(P)
    units = C.unit_intertwiner_basis(P.domain, t.pi_basis)
    kernel = C.kernel_intertwiner_basis(P.domain, t.pi_basis)
    assert len(units) == len(kernel)
    assert _same_span(units, kernel)


def test_unit_basis_on_block_algebra(rng):
    M = block_algebra([2, 1])
    U = np.zeros((3, 3), dtype=complex)
    U[:2, :2] = random_unitary(2, rng)
    U[2, 2] = 1.0
    P = mixed_unitary([0.4, 0.6], [np.eye(3), U], M)
    t = stinespring.build(P)
    assert _same_span(C.unit_intertwiner_basis(M, t.pi_basis), C.kernel_intertwiner_basis(M, t.pi_basis))


@given(st.integers(2, 4), st.integers(1, 5), st.integers(0, 2 ** 31))
def test_arveson_dimension_is_choi_rank(d, r, seed):
    P = random_channel(d, r, np.random.default_rng(seed))
    E = C.arveson(P)
    oracle = np.linalg.matrix_rank(P.choi, tol=1e-9)
    assert E.dim == oracle
    assert max(C.arveson_defects(E).values()) <= 1e-9
    # M' = C: <X_i, X_j> = delta_ij I / d for an HS-orthonormal basis
    assert np.allclose(E.corr.gram, np.einsum("ij,ab->ijab", np.eye(E.dim), np.eye(d) / d), atol=1e-10)


def test_invariants_and_density(rng):
    for P in (depolarizing(0.3), random_channel(3, 2, rng), _dephasing()):
        E = C.arveson(P)
        assert max(C.invariant_defects(E.corr).values()) <= 1e-9
        r = C.density_check(E.corr)
        assert r["rank"] == r["target_dim"] == stinespring.build(P).dil_dim


def test_inner_products_lie_in_commutant():
    E = C.arveson(_dephasing())
    over = E.corr.over
    for g in E.corr.gram.reshape(-1, 2, 2):
        assert contains(over, g)[0]
    assert C.commutant_spanning_dim(E) == 2
    assert C.commutant_spanning_dim(C.arveson(depolarizing(0.3))) == 1


def test_bimodule_actions(rng):
    E = C.arveson(random_channel(2, 2, rng))
    X = E.corr.basis[0]
    R = np.eye(2) * (0.5 + 1j)  # M' = C
    assert np.allclose(E.corr.right(X, R), X @ R)
    assert E.corr.residual(E.corr.left(R, X)) <= 1e-10


def test_roundtrip_y_to_x(rng):
    E = C.arveson(random_channel(2, 3, rng))
    for Y, X in zip(E.phi_map, E.corr.basis):
        assert np.allclose(E.to_intertwiner(Y), X, atol=1e-10)
        assert np.allclose(E.from_intertwiner(X), Y, atol=1e-10)


def test_tensor_dimension():
    EP, EQ = C.arveson(depolarizing(0.3)), C.arveson(random_channel(2, 2, np.random.default_rng(0)))
    T = C.tensor(EP.corr, EQ.corr)
    assert T.dim == EP.dim * EQ.dim  # M' = C


@pytest.mark.parametrize("seed", range(5))
def test_multiplication_coisometry(seed):
    rng = np.random.default_rng(seed)
    P, Q = random_channel(2, 2, rng), random_channel(2, 3, rng)
    m = C.multiplication_map(C.arveson(P), C.arveson(Q), C.arveson(compose(P, Q)))
    C.check_coisometry(m)
    assert m.coisometry_defect <= 1e-8
    assert m.range_dim == C.arveson(compose(P, Q)).dim


def test_multiplication_isometric_for_endomorphism(rng):
    A = unitary_conjugation(random_unitary(2, rng))
    Q = random_channel(2, 2, rng)
    EAQ = C.arveson(compose(A, Q))
    m = C.multiplication_map(C.arveson(A), C.arveson(Q), EAQ)
    assert m.isometry_defect <= 1e-10 and m.kernel_dim == 0 and m.range_dim == EAQ.dim


def test_multiplication_has_kernel_for_depolarizing():
    P = depolarizing(0.3)
    EPP = C.arveson(compose(P, P))
    m = C.multiplication_map(C.arveson(P), C.arveson(P), EPP)
    # 4 x 4 = 16 pairs onto dim E_{P^2} = 4
    assert (m.domain_dim, m.range_dim, m.kernel_dim) == (16, 4, 12)


def test_psi_defects(rng):
    P, Q = random_channel(2, 2, rng), depolarizing(0.3)
    d = C.psi_defects(C.arveson(P), C.arveson(Q), C.arveson(compose(P, Q)))
    assert max(d.values()) <= 1e-9


def test_conjugation_iso(rng):
    U = random_unitary(2, rng)
    r = C.conjugation_iso_check(random_channel(2, 2, rng), unitary_conjugation(U), unitary_conjugation(U.conj().T))
    assert r["gram_defect"] <= 1e-9
    assert r["dim_E_P"] == r["dim_triple_tensor"] == r["dim_image"] == r["dim_E_Q"]
