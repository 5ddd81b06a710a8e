import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from spike_spectra import Circulant, block_dft_conjugate, dft_matrix, solve_toeplitz, toeplitz_inverse
from spike_spectra.errors import DimensionMismatch, IndexOutOfRange, NotBlockCirculant
from spike_spectra.structured import (
    block_dft_reassemble,
    boundary_vectors,
    circulant_apply,
    circulant_eigenvalues,
    split_block_circulant,
    toeplitz_eigenvalues,
    toeplitz_inverse_entry,
    toeplitz_matrix,
)

finite = st.floats(min_value=-10, max_value=10, allow_nan=False)
rows = st.integers(1, 40).flatmap(lambda k: arrays(float, k, elements=finite))


def test_small_circulant_by_hand():
    X = Circulant(np.array([1.0, 2.0, 3.0])).dense()
    assert np.array_equal(X, [[1, 2, 3], [3, 1, 2], [2, 3, 1]])


def test_identity_and_shift_spectra():
    k = 6
    assert np.allclose(circulant_eigenvalues(np.eye(k)[0]), 1.0)
    shift = np.zeros(k)
    shift[1] = 1.0
    assert np.allclose(circulant_eigenvalues(shift), np.exp(2j * np.pi * np.arange(k) / k))


@given(rows)
def test_dft_diagonalizes_circulant(row):
    c = Circulant(row)
    P = dft_matrix(row.size)
    assert np.allclose(c.dense() @ P, P * c.eigenvalues(), atol=1e-10 * max(1, np.abs(row).sum()))


@given(rows)
def test_circulant_apply_matches_dense(row):
    c = Circulant(row)
    v = np.linspace(-1, 1, row.size)
    assert np.allclose(circulant_apply(c, v), c.dense() @ v, atol=1e-12 * max(1, np.abs(row).sum()))


@given(st.integers(1, 128))
def test_dft_is_unitary(k):
    P = dft_matrix(k)
    assert np.max(np.abs(P.conj().T @ P - np.eye(k))) <= 1e-12


@given(st.integers(1, 200))
def test_toeplitz_inverse_closed_form(nbar):
    assert np.max(np.abs(toeplitz_matrix(nbar) @ toeplitz_inverse(nbar) - np.eye(nbar))) <= 1e-11


@given(st.integers(1, 60), st.data())
def test_inverse_entry_formula(nbar, data):
    i = data.draw(st.integers(1, nbar))
    j = data.draw(st.integers(1, nbar))
    assert toeplitz_inverse_entry(nbar, i, j) == pytest.approx(np.linalg.inv(toeplitz_matrix(nbar))[i - 1, j - 1], abs=1e-10)


@given(st.integers(1, 200))
def test_boundary_vectors(nbar):
    up, down = boundary_vectors(nbar)
    T = toeplitz_matrix(nbar)
    e = np.eye(nbar)
    assert np.max(np.abs(T @ up - e[0])) <= 1e-13
    assert np.max(np.abs(T @ down - e[-1])) <= 1e-13
    assert np.array_equal(up[::-1], down)


@given(st.integers(1, 80).flatmap(lambda n: arrays(float, n, elements=finite)))
def test_thomas_matches_closed_form(rhs):
    n = rhs.size
    a = solve_toeplitz(n, rhs, "thomas")
    b = solve_toeplitz(n, rhs, "closed_form")
    assert np.allclose(a, b, atol=1e-9 * max(1.0, np.abs(rhs).max()) * n)


@given(st.integers(1, 100))
def test_toeplitz_spectrum(nbar):
    ev = np.linalg.eigvalsh(toeplitz_matrix(nbar))
    assert np.allclose(np.sort(toeplitz_eigenvalues(nbar)), ev, atol=1e-11)


@given(st.integers(2, 9), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_block_dft_roundtrip(k, q, seed):
    rng = np.random.default_rng(seed)
    blocks = [[Circulant(rng.standard_normal(k)) for _ in range(q)] for _ in range(q)]
    dense = np.block([[b.dense() for b in row] for row in blocks])
    D = block_dft_conjugate(blocks)
    assert np.max(np.abs(block_dft_reassemble(D) - dense)) <= 1e-12 * max(1, np.abs(dense).max()) * q * k
    assert np.allclose(block_dft_conjugate(dense, k), D)


def test_errors():
    with pytest.raises(IndexOutOfRange):
        toeplitz_inverse_entry(4, 0, 1)
    with pytest.raises(IndexOutOfRange):
        toeplitz_inverse_entry(4, 2, 5)
    with pytest.raises(DimensionMismatch):
        solve_toeplitz(3, np.ones(4))
    with pytest.raises(DimensionMismatch):
        Circulant(np.zeros(0))
    with pytest.raises(NotBlockCirculant):
        split_block_circulant(np.arange(16.0).reshape(4, 4), 2)
    with pytest.raises(DimensionMismatch):
        split_block_circulant(np.eye(5), 2)
    with pytest.raises(DimensionMismatch):
        block_dft_conjugate(np.eye(4))
