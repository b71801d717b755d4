import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpdilation.algebra import diagonal_algebra, full_algebra
from cpdilation.cpmap import (PAULI, amplify, choi_from_superop, compose, depolarizing, endomorphism_defect,
                              from_choi, from_kraus, identity_map, is_endomorphism, kraus_from_choi, mixed_unitary,
                              power, random_channel, random_unitary, semigroup, semigroup_defect,
                              semigroup_from_maps, superop_distance, superop_from_choi, unitary_conjugation)
from cpdilation.errors import (DoesNotPreserveAlgebra, InvalidComposition, InvalidMatrix, NotPSD, NotUnital,
                               SemigroupDefect)


def _kraus_apply(ops, T):
    return sum(K.conj().T @ T @ K for K in ops)


@given(st.integers(2, 4), st.integers(1, 4), st.integers(0, 2 ** 31))
def test_random_channel_is_unital_and_matches_kraus_sum(d, r, seed):
    rng = np.random.default_rng(seed)
    P = random_channel(d, r, rng)
    assert np.allclose(P(np.eye(d)), np.eye(d), atol=1e-12)
    T = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    assert np.allclose(P(T), _kraus_apply(P.kraus, T), atol=1e-12)
    # Choi matrix is PSD with rank <= r (brute force)
    w = np.linalg.eigvalsh(P.choi)
    assert w.min() >= -1e-12
    assert P.choi_rank == np.linalg.matrix_rank(P.choi, tol=1e-9) <= r


@given(st.integers(2, 3), st.integers(0, 2 ** 31))
def test_choi_superop_roundtrip(d, seed):
    P = random_channel(d, 2, np.random.default_rng(seed))
    assert np.allclose(superop_from_choi(choi_from_superop(P.superop)), P.superop)
    Q = from_choi(full_algebra(d), P.choi)
    assert superop_distance(P, Q) <= 1e-12
    K = kraus_from_choi(P.choi)
    assert K.shape[0] == P.choi_rank


def test_depolarizing_action():
    P = depolarizing(0.3)
    T = np.array([[1.0, 2.0], [3.0, -1.0]])
    assert np.allclose(P(T), 0.7 * T + 0.3 * np.trace(T) / 2 * np.eye(2))
    assert P.choi_rank == 4
    assert depolarizing(0.0).choi_rank == 1
    assert depolarizing(0.3, 3).choi_rank == 9


def test_compose_and_power(rng):
    P = random_channel(2, 2, rng)
    Q = random_channel(2, 3, rng)
    T = rng.standard_normal((2, 2))
    assert np.allclose(compose(P, Q)(T), P(Q(T)))
    assert np.allclose(power(P, 3).superop, np.linalg.matrix_power(P.superop, 3))
    # depolarizing powers: p_n = 1 - (1 - p)^n
    assert superop_distance(power(depolarizing(0.3), 3), depolarizing(1 - 0.7 ** 3)) <= 1e-12
    with pytest.raises(InvalidComposition):
        compose(P, random_channel(3, 1, rng))


def test_endomorphisms(rng):
    U = random_unitary(3, rng)
    assert is_endomorphism(unitary_conjugation(U))
    assert endomorphism_defect(depolarizing(0.3)) > 0.1
    assert is_endomorphism(identity_map(full_algebra(2)))


def test_unitality_and_positivity_checks():
    with pytest.raises(NotUnital):
        from_kraus(full_algebra(2), [0.9 * np.eye(2)])
    C = depolarizing(0.0).choi.copy()
    w, V = np.linalg.eigh(C)
    with pytest.raises(NotPSD):
        from_choi(full_algebra(2), C - 0.01 * np.outer(V[:, 0], V[:, 0].conj()))
    with pytest.raises(InvalidMatrix):
        from_kraus(full_algebra(2), [np.eye(3)])


def test_preserves_algebra():
    D = diagonal_algebra(2)
    P = mixed_unitary([0.5, 0.5], [np.eye(2), PAULI["Z"]], D)
    assert np.allclose(P(np.diag([1.0, 2.0])), np.diag([1.0, 2.0]))
    with pytest.raises(DoesNotPreserveAlgebra):
        # Hadamard conjugation moves diagonal matrices off the diagonal
        from_kraus(D, [np.array([[1, 1], [1, -1]]) / np.sqrt(2)])


def test_amplify():
    P = depolarizing(0.3)
    A = amplify(P, 2)
    T = np.array([[1.0, 2.0], [0.5, 3.0]])
    assert np.allclose(A(np.kron(T, np.eye(2))), np.kron(P(T), np.eye(2)))
    assert A.domain.dim == 4


def test_semigroup_law():
    P = depolarizing(0.3)
    sg = semigroup(P, 3)
    assert sg.horizon == 3
    assert semigroup_defect(sg.maps) <= 1e-12
    assert superop_distance(sg[2], compose(P, P)) <= 1e-12
    bad = [identity_map(full_algebra(2)), P, P]
    assert semigroup_defect(bad) == pytest.approx(0.21, abs=1e-9)  # |0.49 - 0.7|
    with pytest.raises(SemigroupDefect):
        semigroup_from_maps(bad)
    with pytest.raises(ValueError):
        semigroup(P, 0)
