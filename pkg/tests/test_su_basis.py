"""Basis construction, vectorization round trips, superoperator matrices."""

import numpy as np
import pytest

from tieredbath.errors import ValidationError
from tieredbath.su_basis import (
    build_basis,
    build_hcross,
    build_vcirc,
    build_vcross,
    devectorize,
    operator_coeffs,
    superop_to_matrix,
    vectorize,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def random_hermitian(n, rng):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + a.conj().T


def random_density(n, rng):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_qubit_basis_is_pauli():
    b = build_basis(2)
    assert np.allclose(b.nu[0], SX)
    assert np.allclose(b.nu[1], SY)
    assert np.allclose(b.nu[2], SZ)
    assert b.f[0, 1, 2] == pytest.approx(1.0, abs=1e-14)
    assert np.abs(b.d).max() < 1e-14
    # f equals the Levi-Civita symbol
    eps = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
        eps[k, j, i] = -1.0
        eps[i, k, j] = -1.0
    assert np.abs(b.f - eps).max() < 1e-14


@pytest.mark.parametrize("n", [2, 3, 4])
def test_orthonormality_and_tracelessness(n):
    b = build_basis(n)
    for i in range(b.m):
        assert abs(np.trace(b.nu[i])) < 1e-14
        assert np.abs(b.nu[i] - b.nu[i].conj().T).max() < 1e-14
        for j in range(b.m):
            expected = 2.0 if i == j else 0.0
            assert np.trace(b.nu[i] @ b.nu[j]) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_structure_constants_brute_force(n):
    """f and d recomputed with explicit loops over all index triples."""
    b = build_basis(n)
    for i in range(b.m):
        for j in range(b.m):
            comm = b.nu[i] @ b.nu[j] - b.nu[j] @ b.nu[i]
            anti = b.nu[i] @ b.nu[j] + b.nu[j] @ b.nu[i]
            for k in range(b.m):
                f_ijk = np.trace(comm @ b.nu[k]) / 4j
                d_ijk = np.trace(anti @ b.nu[k]) / 4.0
                assert abs(f_ijk.imag) < 1e-12 and abs(d_ijk.imag) < 1e-12
                assert b.f[i, j, k] == pytest.approx(f_ijk.real, abs=1e-12)
                assert b.d[i, j, k] == pytest.approx(d_ijk.real, abs=1e-12)


@pytest.mark.parametrize("n", [3, 4])
def test_f_antisymmetric_d_symmetric(n):
    b = build_basis(n)
    for perm, sign in [((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 2, 0), 1), ((2, 0, 1), 1)]:
        assert np.abs(b.f - sign * np.transpose(b.f, perm)).max() < 1e-12
        assert np.abs(b.d - np.transpose(b.d, perm)).max() < 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_product_expansion_identity(n):
    """nu_i nu_j = (2/n) delta_ij I + (d_ijk + i f_ijk) nu_k elementwise."""
    b = build_basis(n)
    eye = np.eye(n)
    for i in range(b.m):
        for j in range(b.m):
            lhs = b.nu[i] @ b.nu[j]
            rhs = (2.0 / n) * (i == j) * eye + np.einsum(
                "k,kab->ab", b.d[i, j] + 1j * b.f[i, j], b.nu
            )
            assert np.abs(lhs - rhs).max() < 1e-12


def test_build_basis_rejects_bad_dimension():
    with pytest.raises(ValidationError):
        build_basis(1)
    with pytest.raises(ValidationError):
        build_basis(0)


def test_vectorize_identity_and_up_state():
    b = build_basis(2)
    assert np.allclose(vectorize(np.eye(2) / 2, b).coeffs, [0, 0, 0, 0.5])
    up = np.array([[1, 0], [0, 0]], dtype=complex)
    assert np.allclose(vectorize(up, b).coeffs, [0, 0, 0.5, 0.5])


def test_vectorize_validation():
    b = build_basis(2)
    with pytest.raises(ValidationError):
        vectorize(np.array([[1.0, 0.5], [0.0, 0.0]]), b)  # not Hermitian
    with pytest.raises(ValidationError):
        vectorize(np.eye(2), b)  # trace 2


@pytest.mark.parametrize("n", [2, 3])
def test_round_trip_random_states(n):
    rng = np.random.default_rng(7)
    b = build_basis(n)
    for _ in range(20):
        rho = random_density(n, rng)
        again = devectorize(vectorize(rho, b), b)
        assert np.abs(again - rho).max() < 1e-12


def test_hcross_matches_rabi_matrix():
    """(Delta/2, 0, eps/2) coefficients give the explicit 4x4 matrix."""
    b = build_basis(2)
    eps, delta = 1.3, 0.6
    hx = build_hcross(np.array([delta / 2, 0.0, eps / 2]), b).matrix
    expected = np.array(
        [
            [0, -1j * eps, 0, 0],
            [1j * eps, 0, -1j * delta, 0],
            [0, 1j * delta, 0, 0],
            [0, 0, 0, 0],
        ]
    )
    assert np.abs(hx - expected).max() < 1e-14
    assert np.abs(hx - hx.conj().T).max() < 1e-14  # Hermitian


def test_hcross_zero():
    b = build_basis(2)
    assert np.abs(build_hcross(np.zeros(3), b).matrix).max() == 0.0


def test_vcross_vcirc_match_sigma_z_matrices():
    b = build_basis(2)
    v = np.array([0.0, 0.0, 1.0, 0.0])
    vx = build_vcross(v, b).matrix
    vc = build_vcirc(v, b).matrix
    expected_vx = np.zeros((4, 4), dtype=complex)
    expected_vx[0, 1] = -2j
    expected_vx[1, 0] = 2j
    expected_vc = np.zeros((4, 4), dtype=complex)
    expected_vc[2, 3] = 2.0
    expected_vc[3, 2] = 2.0
    assert np.abs(vx - expected_vx).max() < 1e-14
    assert np.abs(vc - expected_vc).max() < 1e-14


def test_vcross_identity_component_commutes():
    b = build_basis(3)
    v = np.zeros(9)
    v[-1] = 2.5
    assert np.abs(build_vcross(v, b).matrix).max() == 0.0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_commutator_action_oracle(n):
    """-i H^x applied to coefficients == coefficients of -i[H, rho]."""
    rng = np.random.default_rng(21)
    b = build_basis(n)
    for _ in range(20):
        h = rng.standard_normal(b.m)
        rho = random_density(n, rng)
        hmat = np.einsum("k,kab->ab", h, b.nu)
        lhs = -1j * build_hcross(h, b).matrix @ operator_coeffs(rho, b)
        rhs = operator_coeffs(-1j * (hmat @ rho - rho @ hmat), b)
        assert np.abs(lhs - rhs).max() < 1e-10


@pytest.mark.parametrize("n", [2, 3, 4])
def test_commutator_anticommutator_actions(n):
    rng = np.random.default_rng(5)
    b = build_basis(n)
    for _ in range(20):
        v = rng.standard_normal(n * n)
        vmat = devectorize(v, b)
        rho = random_hermitian(n, rng)
        p = operator_coeffs(rho, b)
        lhs_cross = -1j * build_vcross(v, b).matrix @ p
        rhs_cross = operator_coeffs(-1j * (vmat @ rho - rho @ vmat), b)
        assert np.abs(lhs_cross - rhs_cross).max() < 1e-10
        lhs_circ = build_vcirc(v, b).matrix @ p
        rhs_circ = operator_coeffs(vmat @ rho + rho @ vmat, b)
        assert np.abs(lhs_circ - rhs_circ).max() < 1e-10


def test_anticommutator_oracle_gell_mann_lambda1():
    rng = np.random.default_rng(11)
    b = build_basis(3)
    v = np.zeros(9)
    v[0] = 1.0  # lambda_1
    vc = build_vcirc(v, b).matrix
    vmat = b.nu[0]
    for _ in range(20):
        rho = random_density(3, rng)
        lhs = vc @ operator_coeffs(rho, b)
        rhs = operator_coeffs(vmat @ rho + rho @ vmat, b)
        assert np.abs(lhs - rhs).max() < 1e-10


def test_superop_to_matrix_reproduces_vcross():
    b = build_basis(3)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(9)
    vmat = devectorize(v, b)
    direct = superop_to_matrix(lambda r: -1j * (vmat @ r - r @ vmat), b)
    assert np.abs(direct - (-1j) * build_vcross(v, b).matrix).max() < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_trace_row_vanishes(n):
    """Generator-level trace preservation: last rows of H^x and V^x are zero."""
    rng = np.random.default_rng(13)
    b = build_basis(n)
    h = rng.standard_normal(b.m)
    v = rng.standard_normal(n * n)
    assert np.abs(build_hcross(h, b).matrix[-1]).max() == 0.0
    assert np.abs(build_hcross(h, b).matrix[:, -1]).max() == 0.0
    assert np.abs(build_vcross(v, b).matrix[-1]).max() == 0.0
