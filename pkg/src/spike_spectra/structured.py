"""Circulant, DFT and tridiagonal Toeplitz helpers used by the reductions.

Conventions: a circulant ``Cir(x)`` has entries ``X[i, j] = x[(j - i) % k]``;
its s-th eigenvalue is ``sum_l x[l] * exp(2j*pi*s*l/k)`` with eigenvector
column ``s`` of :func:`dft_matrix`, so ``X = P diag(eta) P^*``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, NotBlockCirculant


@dataclass(frozen=True, eq=False)
class Circulant:
    first_row: np.ndarray

    def __post_init__(self):
        row = np.asarray(self.first_row)
        if row.ndim != 1 or row.size < 1:
            raise DimensionMismatch("circulant first row must be a non-empty vector")
        if not np.all(np.isfinite(row)):
            raise ValueError("circulant entries must be finite")
        row = row.copy()
        row.setflags(write=False)
        object.__setattr__(self, "first_row", row)

    @property
    def size(self) -> int:
        return self.first_row.size

    def dense(self) -> np.ndarray:
        k = self.size
        idx = (np.arange(k)[None, :] - np.arange(k)[:, None]) % k
        return self.first_row[idx]

    def eigenvalues(self) -> np.ndarray:
        return circulant_eigenvalues(self)

    @classmethod
    def from_dense(cls, X: np.ndarray, atol: float = 1e-12) -> "Circulant":
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise DimensionMismatch(f"expected a square block, got shape {X.shape}")
        c = cls(X[0])
        scale = max(1.0, float(np.max(np.abs(X))))
        if np.max(np.abs(c.dense() - X)) > atol * scale:
            raise NotBlockCirculant("block is not circulant")
        return c


def _phases(k: int) -> np.ndarray:
    sl = np.outer(np.arange(k), np.arange(k)) % k
    return np.exp(2j * np.pi * sl / k)


def circulant_eigenvalues(c: Circulant | np.ndarray) -> np.ndarray:
    """Explicit exponential sums, x_0 term included."""
    row = c.first_row if isinstance(c, Circulant) else np.asarray(c)
    return _phases(row.size) @ row


def dft_matrix(k: int) -> np.ndarray:
    """P with columns E_s = k^{-1/2} (1, w^s, w^{2s}, ...), w = exp(2j*pi/k)."""
    if k < 1:
        raise DimensionMismatch("DFT dimension must be positive")
    return _phases(k) / np.sqrt(k)


def circulant_apply(c: Circulant, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    k = c.size
    if v.shape[0] != k:
        raise DimensionMismatch(f"vector length {v.shape[0]} does not match circulant size {k}")
    # (Xv)_i = sum_l x_l v_{i+l}
    out = np.zeros(v.shape, dtype=np.result_type(c.first_row, v))
    for l, x in enumerate(c.first_row):
        if x != 0:
            out += x * np.roll(v, -l, axis=0)
    return out


def toeplitz_matrix(nbar: int) -> np.ndarray:
    """The nbar x nbar tridiagonal matrix with 2 on the diagonal and -1 beside it."""
    if nbar < 1:
        raise DimensionMismatch("Toeplitz dimension must be at least 1")
    T = 2.0 * np.eye(nbar)
    i = np.arange(nbar - 1)
    T[i, i + 1] = -1.0
    T[i + 1, i] = -1.0
    return T


def toeplitz_eigenvalues(nbar: int) -> np.ndarray:
    j = np.arange(1, nbar + 1)
    return 2.0 - 2.0 * np.cos(j * np.pi / (nbar + 1))


def toeplitz_inverse_entry(nbar: int, i: int, j: int) -> float:
    """Entry (i, j) of the inverse, indices starting at 1."""
    if not (1 <= i <= nbar and 1 <= j <= nbar):
        raise IndexOutOfRange(f"index ({i}, {j}) outside 1..{nbar}")
    return min(i, j) - i * j / (nbar + 1)


def toeplitz_inverse(nbar: int) -> np.ndarray:
    if nbar < 1:
        raise DimensionMismatch("Toeplitz dimension must be at least 1")
    i = np.arange(1, nbar + 1)
    return np.minimum.outer(i, i) - np.outer(i, i) / (nbar + 1)


def boundary_vectors(nbar: int) -> tuple[np.ndarray, np.ndarray]:
    """Solutions of T s = e_1 and T s = e_nbar."""
    if nbar < 1:
        raise DimensionMismatch("Toeplitz dimension must be at least 1")
    up = np.arange(nbar, 0, -1) / (nbar + 1)
    return up, up[::-1].copy()


def solve_toeplitz(nbar: int, rhs: np.ndarray, method: str = "thomas") -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != nbar:
        raise DimensionMismatch(f"rhs length {rhs.shape[0]} does not match dimension {nbar}")
    if method == "closed_form":
        return toeplitz_inverse(nbar) @ rhs
    if method != "thomas":
        raise ValueError(f"unknown method {method!r}")
    # forward sweep on (-1, 2, -1); the pivots are (i+1)/i
    d = rhs.astype(float).copy()
    piv = np.empty(nbar)
    piv[0] = 2.0
    for i in range(1, nbar):
        piv[i] = 2.0 - 1.0 / piv[i - 1]
        d[i] = d[i] + d[i - 1] / piv[i - 1]
    x = np.empty_like(d)
    x[-1] = d[-1] / piv[-1]
    for i in range(nbar - 2, -1, -1):
        x[i] = (d[i] + x[i + 1]) / piv[i]
    return x


def split_block_circulant(M: np.ndarray, k: int, atol: float = 1e-12) -> list[list[Circulant]]:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % k:
        raise DimensionMismatch(f"matrix of shape {M.shape} is not a grid of {k}x{k} blocks")
    q = M.shape[0] // k
    return [[Circulant.from_dense(M[u * k:(u + 1) * k, v * k:(v + 1) * k], atol) for v in range(q)]
            for u in range(q)]


def block_dft_conjugate(blocks, k: int | None = None) -> np.ndarray:
    """Per-frequency q x q matrices D[s, u, v] = eta_s(block (u, v)).

    ``blocks`` is either a q x q nested list of :class:`Circulant` or a dense
    (q k) x (q k) array whose k x k blocks are circulant.
    """
    if isinstance(blocks, np.ndarray):
        if k is None:
            raise DimensionMismatch("block size k is required for a dense input")
        blocks = split_block_circulant(blocks, k)
    q = len(blocks)
    if any(len(row) != q for row in blocks):
        raise DimensionMismatch("block grid must be square")
    k = blocks[0][0].size
    if any(b.size != k for row in blocks for b in row):
        raise DimensionMismatch("all blocks must have the same size")
    D = np.empty((k, q, q), dtype=complex)
    for u in range(q):
        for v in range(q):
            D[:, u, v] = circulant_eigenvalues(blocks[u][v])
    return D


def block_dft_reassemble(D: np.ndarray) -> np.ndarray:
    """Inverse of :func:`block_dft_conjugate`: block (u, v) = P diag(D[:, u, v]) P^*."""
    k, q, _ = D.shape
    P = dft_matrix(k)
    out = np.empty((q * k, q * k), dtype=complex)
    for u in range(q):
        for v in range(q):
            out[u * k:(u + 1) * k, v * k:(v + 1) * k] = (P * D[:, u, v]) @ P.conj().T
    return out
