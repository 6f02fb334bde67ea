import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zzforge.qcore import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DimensionMismatchError,
    NonHermitianError,
    check_density_matrix,
    expm_skew_hermitian,
    is_hermitian,
    is_unitary,
    normalize,
    partial_trace,
    pauli_basis,
    tensor,
)

from conftest import random_density_matrix, random_hermitian


def complex_matrices(rows, cols):
    elem = st.floats(-5, 5, allow_nan=False)
    return st.lists(
        st.lists(st.tuples(elem, elem), min_size=cols, max_size=cols),
        min_size=rows,
        max_size=rows,
    ).map(lambda m: np.array([[re + 1j * im for re, im in row] for row in m]))


class TestTensor:
    def test_identity_case(self):
        np.testing.assert_allclose(tensor(PAULI_I, PAULI_I), np.eye(4))

    def test_diagonal_case(self):
        np.testing.assert_allclose(
            tensor(PAULI_Z, PAULI_Z), np.diag([1, -1, -1, 1]).astype(complex)
        )

    def test_index_formula_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        t = tensor(a, b)
        for i in range(3):
            for j in range(3):
                for k in range(2):
                    for l in range(2):
                        assert t[i * 2 + k, j * 2 + l] == pytest.approx(a[i, j] * b[k, l])

    @settings(max_examples=25, deadline=None)
    @given(complex_matrices(2, 2), complex_matrices(2, 2), complex_matrices(2, 2))
    def test_associative(self, a, b, c):
        left = tensor(tensor(a, b), c)
        right = tensor(a, tensor(b, c))
        np.testing.assert_allclose(left, right, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(complex_matrices(2, 2), complex_matrices(2, 2), st.floats(-3, 3))
    def test_bilinear(self, a, b, s):
        np.testing.assert_allclose(tensor(s * a, b), s * tensor(a, b), atol=1e-12)
        np.testing.assert_allclose(tensor(a, s * b), s * tensor(a, b), atol=1e-12)


class TestExpmSkewHermitian:
    def test_zero_generator(self):
        np.testing.assert_allclose(expm_skew_hermitian(np.zeros((3, 3)), 1.0), np.eye(3))

    def test_resonant_pi_rotation(self):
        omega = 2 * np.pi * 5e6
        u = expm_skew_hermitian(omega / 2 * PAULI_X, np.pi / omega)
        np.testing.assert_allclose(u, -1j * PAULI_X, atol=1e-12)

    def test_power_series_oracle(self):
        rng = np.random.default_rng(1)
        h = random_hermitian(rng, 4)
        t = 1e-2
        series = np.eye(4, dtype=complex)
        term = np.eye(4, dtype=complex)
        for k in range(1, 30):
            term = term @ (-1j * h * t) / k
            series = series + term
        np.testing.assert_allclose(expm_skew_hermitian(h, t), series, atol=1e-8)

    def test_result_unitary(self):
        rng = np.random.default_rng(2)
        u = expm_skew_hermitian(random_hermitian(rng, 5), 2.3)
        assert is_unitary(u)

    def test_group_property(self):
        rng = np.random.default_rng(3)
        h = random_hermitian(rng, 4)
        u1 = expm_skew_hermitian(h, 0.7)
        u2 = expm_skew_hermitian(h, 1.1)
        np.testing.assert_allclose(u1 @ u2, expm_skew_hermitian(h, 1.8), atol=1e-9)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NonHermitianError):
            expm_skew_hermitian(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


class TestPartialTrace:
    def test_bell_state_marginal(self):
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        rho = np.outer(bell, bell.conj())
        np.testing.assert_allclose(partial_trace(rho, (2, 2), 1), np.eye(2) / 2, atol=1e-12)

    def test_product_state(self):
        rng = np.random.default_rng(4)
        ra = random_density_matrix(rng, 2)
        rb = random_density_matrix(rng, 3)
        np.testing.assert_allclose(partial_trace(tensor(ra, rb), (2, 3), 0), ra, atol=1e-12)

    def test_double_sum_oracle(self):
        rng = np.random.default_rng(5)
        rho = random_density_matrix(rng, 6)
        got = partial_trace(rho, (2, 3), 0)
        expect = np.zeros((2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                for k in range(3):
                    expect[i, j] += rho[i * 3 + k, j * 3 + k]
        np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_trace_preserved(self):
        rng = np.random.default_rng(6)
        m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        assert np.trace(partial_trace(m, (2, 3), 1)) == pytest.approx(np.trace(m), abs=1e-10)

    def test_psd_preserved(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            rho = random_density_matrix(rng, 8)
            red = partial_trace(rho, (2, 2, 2), int(rng.integers(3)))
            assert is_hermitian(red, 1e-9)
            assert np.linalg.eigvalsh(red).min() >= -1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            partial_trace(np.eye(5), (2, 3), 0)


class TestPauliBasis:
    def test_single_qubit(self):
        basis = pauli_basis(1)
        for got, want in zip(basis, (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)):
            np.testing.assert_allclose(got, want)

    def test_two_qubit_orthogonality(self):
        basis = pauli_basis(2)
        assert len(basis) == 16
        for i, p in enumerate(basis):
            assert is_hermitian(p)
            for j, q in enumerate(basis):
                assert np.trace(p @ q) == pytest.approx(4.0 * (i == j), abs=1e-12)

    def test_index_five_is_xx(self):
        np.testing.assert_allclose(pauli_basis(2)[5], tensor(PAULI_X, PAULI_X))

    def test_traceless_except_identity(self):
        basis = pauli_basis(2)
        assert np.trace(basis[0]) == pytest.approx(4.0)
        for p in basis[1:]:
            assert abs(np.trace(p)) < 1e-12

    def test_unsupported(self):
        with pytest.raises(ValueError):
            pauli_basis(3)


class TestStateHelpers:
    def test_normalize(self):
        v = normalize(np.array([3.0, 4.0j]))
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_density_validation(self):
        check_density_matrix(np.eye(4) / 4)
        with pytest.raises(ValueError):
            check_density_matrix(np.eye(4) / 2)
        with pytest.raises(NonHermitianError):
            check_density_matrix(np.array([[0.5, 0.5], [0.0, 0.5]], dtype=complex))

    def test_is_unitary(self):
        assert is_unitary(np.diag([1j, -1j]).astype(complex))
        assert not is_unitary(np.diag([1.0, 0.5]).astype(complex))
