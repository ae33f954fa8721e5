from __future__ import annotations

import numpy as np
import pytest
from scipy import linalg as sla

from errors import IllConditionedError, InputValidationError, SingularMatrixError
from models.types import RepTuple
from tests.builders import PAULI_X, random_matrix, random_tuple


@pytest.mark.parametrize('M, eigenvalues', [
    (np.eye(2), ((1.0, 2),)),
    (np.diag([3.0, -1.0]), ((3.0, 1), (-1.0, 1))),
    (np.array([[0.0, 1.0], [0.0, 0.0]]), ((0.0, 2),)),
])
def test_eigen_spectrum(linalg, M, eigenvalues) -> None:
    spectrum = linalg.eigen_spectrum(M)
    assert sorted(spectrum.multiplicities) == sorted(m for _, m in eigenvalues)
    for value, mult in eigenvalues:
        assert any(abs(v - value) < 1e-12 and k == mult for v, k in spectrum.eigenvalues)
    Z = spectrum.basis_change
    assert np.allclose(np.tril(Z.conj().T @ M @ Z, -1), 0.0, atol=1e-12)


@pytest.mark.parametrize('M, expected', [
    (np.eye(2), np.zeros((2, 2))),
    (-np.eye(2), 0.5 * np.eye(2)),
    (np.exp(0.6j * np.pi) * np.eye(3), 0.3 * np.eye(3)),
    (np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[0.0, 1.0], [0.0, 0.0]]) / (2j * np.pi)),
])
def test_normalized_logarithm_known_values(linalg, M, expected) -> None:
    assert np.allclose(linalg.matrix_log_normalized(M), expected, atol=1e-12)


def test_integer_offset_and_boundary(linalg) -> None:
    assert linalg.integer_offset(2.5 + 1j, -0.5 + 1j) == 3
    assert linalg.integer_offset(0.3, 0.1) is None
    assert linalg.integer_offset(1.0 + 1e-12, 0.0) == 1
    assert linalg.near_integer_boundary(1.0 + 5e-7, 0.0)
    assert not linalg.near_integer_boundary(1.0, 0.0)


def test_cluster_values_is_transitive(linalg) -> None:
    values = [0.0, 0.4, 1.0, 2.4, 0.7]
    groups = linalg.cluster_values(values, lambda a, b: linalg.integer_offset(a, b) is not None)
    assert groups == [[0, 2], [1, 3], [4]]


def test_spectral_blocks_block_diagonalize(linalg) -> None:
    rng = np.random.default_rng(3)
    S0 = random_matrix(rng, 4, 0.3)
    M = S0 @ np.diag([2.0, 0.5j, 2.0, -1.0]) @ np.linalg.inv(S0)
    S, blocks = linalg.spectral_blocks(M)
    D = np.linalg.solve(S, M @ S)
    expected = sla.block_diag(*[b.matrix for b in blocks])
    assert np.allclose(D, expected, atol=1e-10)
    assert sorted(b.size for b in blocks) == [1, 1, 2]


@pytest.mark.parametrize('m', [1, 2, 3, 4])
def test_normalized_logarithm_random(linalg, m) -> None:
    rng = np.random.default_rng(10 + m)
    for _ in range(20):
        M = random_matrix(rng, m, 0.8)
        R = linalg.matrix_log_normalized(M)
        assert np.allclose(sla.expm(2j * np.pi * R), M, atol=1e-9 * max(1.0, np.linalg.norm(M)))
        re = np.linalg.eigvals(R).real
        assert np.all(re >= -1e-9) and np.all(re < 1.0)


def test_normalized_logarithm_jordan_block(linalg) -> None:
    M = np.array([[2.0, 1.0], [0.0, 2.0]], dtype=complex)
    R = linalg.matrix_log_normalized(M)
    assert np.allclose(sla.expm(2j * np.pi * R), M, atol=1e-12)
    assert abs(R[1, 0]) < 1e-12


def test_normalized_logarithm_on_branch_cut(linalg) -> None:
    R = linalg.matrix_log_normalized(np.diag([1.0, -1.0]).astype(complex))
    assert np.allclose(np.sort(np.diag(R).real), [0.0, 0.5], atol=1e-12)
    assert np.allclose(R - np.diag(np.diag(R)), 0.0, atol=1e-12)


def test_normalized_logarithm_near_branch_cut_aborts(linalg) -> None:
    M = np.diag([np.exp(2j * np.pi * 1e-11), 3.0])
    with pytest.raises(IllConditionedError):
        linalg.matrix_log_normalized(M)


def test_normalized_logarithm_singular(linalg) -> None:
    with pytest.raises(SingularMatrixError):
        linalg.matrix_log_normalized(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_solve_conjugator_recovers_conjugation(linalg) -> None:
    rng = np.random.default_rng(5)
    rep = random_tuple(rng, 3, 3)
    h = random_matrix(rng, 3, 0.5)
    h_inv = np.linalg.inv(h)
    other = rep.replace([h_inv @ M @ h for M in rep.matrices])
    g = linalg.solve_conjugator(rep, other)
    assert g is not None
    g_inv = np.linalg.inv(g)
    for S, D in zip(rep.matrices, other.matrices):
        assert np.allclose(g_inv @ S @ g, D, atol=1e-8)


def test_solve_conjugator_rejects_different_classes(linalg) -> None:
    rng = np.random.default_rng(6)
    a, b = random_tuple(rng, 3, 2), random_tuple(rng, 3, 2)
    assert linalg.solve_conjugator(a, b) is None


def test_solve_conjugator_shape_mismatch(linalg) -> None:
    rng = np.random.default_rng(7)
    with pytest.raises(InputValidationError):
        linalg.solve_conjugator(random_tuple(rng, 3, 2), random_tuple(rng, 4, 2))
    with pytest.raises(InputValidationError):
        linalg.solve_conjugator(random_tuple(rng, 3, 2), random_tuple(rng, 3, 3))


def test_tuples_need_three_invertible_matrices() -> None:
    with pytest.raises(InputValidationError):
        RepTuple((np.eye(2), np.eye(2)))
    with pytest.raises(InputValidationError):
        RepTuple((np.eye(2), np.eye(2), np.zeros((2, 2))))
    with pytest.raises(InputValidationError):
        RepTuple((np.eye(2),) * 3, accuracy=-1.0)
    assert RepTuple((np.eye(2),) * 3, accuracy=1e-8).replace([2 * np.eye(2)] * 3).accuracy == 1e-8


def test_commutant_of_scalar_and_diagonal(linalg) -> None:
    assert len(linalg.commutant_basis(np.eye(3))) == 9
    assert len(linalg.commutant_basis([np.diag([1.0, 2.0, 3.0])])) == 3


def test_commutant_follows_schur(linalg) -> None:
    pair = [PAULI_X, np.diag([1.0, -1.0])]
    assert len(linalg.commutant_basis(pair)) == 1
    doubled = [sla.block_diag(A, A) for A in pair]
    assert len(linalg.commutant_basis(doubled)) == 4


def test_jordan_basis_orders_chains(linalg) -> None:
    rng = np.random.default_rng(8)
    nil = np.zeros((3, 3), dtype=complex)
    nil[0, 1] = 1.0
    S = random_matrix(rng, 3, 0.3)
    N = S @ nil @ np.linalg.inv(S)
    J = linalg.jordan_basis(N)
    form = np.linalg.solve(J, N @ J)
    assert np.allclose(form, nil, atol=1e-9)
