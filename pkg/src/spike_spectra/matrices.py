"""Leading-order interaction matrices, their reductions and kernel vectors.

Two assembly routes are kept side by side:

* :func:`assemble_H_alpha` / :func:`assemble_M1` write the closed-form blocks
  in terms of the constants (delta2, sigma1, sigma2, sigma3);
* :func:`pairwise_matrix` sums the nearest-neighbor rule
  M_ab = s_a s_b  d_a . K(y_a - y_b) . d_b,
  M_aa = -sum_z s_a s_z  d_a . K(y_a - y_z) . d_a,
  K(r e) = psi1(r) e e^T + psi2(r) (I - e e^T),
  over the chain neighbor graph of the configuration.

Component vectors use the configuration's canonical layout
[ring y_1 | ring y_{m+1} | inner interiors | outer interiors]; M1 stacks the
first frame component (radial / edge tangent) before the second (radial
perpendicular / edge normal).

Block-placement map (row family, column family), one component:
  ring1-ring1  circulant of the y_1 vertices
  ring2-ring2  diagonal at the y_{m+1} vertices
  ring1-Y1     "L": ring i meets the first interior point of segment i
  ring2-Y1     "R": ring i meets the last interior point of segment i
  ring2-Y2     "L": ring i meets the first point of edge i,
               "R": ring i meets the last point of edge i-1
  Y1-Y1, Y2-Y2 block-diagonal multiples of the (2, -1) Toeplitz matrix
Cross-component blocks of M1: ring1(c1)-ring1(c2), ring2(c1)-Y2(c2),
ring2(c2)-Y2(c1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .configuration import Layout, SpikeConfiguration
from .errors import LayoutMismatch
from .kernels import KernelTable, SigmaConstants, interaction_tensor
from .structured import Circulant, boundary_vectors, solve_toeplitz, toeplitz_matrix

FAMILIES = ("ring1", "ring2", "Y1", "Y2")


# ----------------------------------------------------------------------------
# block container

@dataclass(eq=False)
class BlockMatrix:
    """Dense matrix with named blocks over (component, family) index sets.

    ``blocks`` maps a name to ((row comp, row family), (col comp, col family),
    array); off-diagonal placements are mirrored so the result is symmetric.
    """

    which: str
    layout: Layout
    components: int
    scale: float
    sigmas: SigmaConstants | None = None
    blocks: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.components * self.layout.size

    def family_slice(self, comp: int, fam: str) -> slice:
        base = comp * self.layout.size
        sl = self.layout.block_slices()[fam]
        return slice(base + sl.start, base + sl.stop)

    def add(self, name: str, row: tuple[int, str], col: tuple[int, str], block: np.ndarray) -> None:
        rs, cs = self.family_slice(*row), self.family_slice(*col)
        shape = (rs.stop - rs.start, cs.stop - cs.start)
        if block.shape != shape:
            raise LayoutMismatch(f"block {name} has shape {block.shape}, layout expects {shape}")
        self.blocks[name] = (row, col, block)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for row, col, block in self.blocks.values():
            rs, cs = self.family_slice(*row), self.family_slice(*col)
            out[rs, cs] += block
            if row != col:
                out[cs, rs] += block.T
        return out

    def manifest(self) -> dict:
        return {"which": self.which, "k": self.layout.k, "m": self.layout.m, "n": self.layout.n,
                "components": self.components, "scale": self.scale,
                "blocks": {name: {"row": list(r), "col": list(c), "shape": list(b.shape)}
                           for name, (r, c, b) in self.blocks.items()}}


# ----------------------------------------------------------------------------
# incidence patterns

def _ring_circulant(k: int, diag: float, off: float, off_last: float | None = None) -> np.ndarray:
    row = np.zeros(k)
    row[0] = diag
    row[1] += off
    row[k - 1] += off if off_last is None else off_last
    return Circulant(row).dense()


def _inner_incidence(L: Layout, first: bool, value: float) -> np.ndarray:
    """(k x k(m-1)): ring i meets the first (or last) interior point of segment i."""
    out = np.zeros((L.k, L.k * L.inner))
    for i in range(L.k):
        out[i, i * L.inner + (0 if first else L.inner - 1)] = value
    return out


def _outer_incidence(L: Layout, v_first: float, v_last: float) -> np.ndarray:
    """(k x k(2n-1)): ring i meets edge i at its first point and edge i-1 at its last."""
    out = np.zeros((L.k, L.k * L.outer))
    for i in range(L.k):
        out[i, i * L.outer] += v_first
        out[i, ((i - 1) % L.k) * L.outer + L.outer - 1] += v_last
    return out


def _toeplitz_blocks(k: int, nbar: int, coef: float) -> np.ndarray:
    return np.kron(np.eye(k), coef * toeplitz_matrix(nbar))


def _check_layout(config: SpikeConfiguration, sig: SigmaConstants) -> Layout:
    if config.m < 2:
        raise LayoutMismatch("the inner segments need at least one interior point (m >= 2)")
    if sig.k != config.k or abs(sig.ell - config.ell) > 1e-12 * config.ell \
            or abs(sig.ell_bar - config.ell_bar) > 1e-12 * config.ell_bar:
        raise LayoutMismatch("sigma constants were evaluated for a different configuration")
    return config.layout


# ----------------------------------------------------------------------------
# closed-form assembly

def assemble_H_alpha(config: SpikeConfiguration, sig: SigmaConstants, psi2_ell: float = float("nan")) -> BlockMatrix:
    """Out-of-plane matrix divided by psi2(ell); identical for every alpha >= 3."""
    L = _check_layout(config, sig)
    k, sn = L.k, math.sin(math.pi / L.k)
    x = sig.delta2 / (2 * sn)
    H = BlockMatrix("Halpha", L, 1, psi2_ell, sig)
    H.add("H1", (0, "ring1"), (0, "ring1"), _ring_circulant(k, -1 - 2 * x, x))
    H.add("H2", (0, "ring1"), (0, "Y1"), _inner_incidence(L, True, 1.0))
    H.add("H3", (0, "ring2"), (0, "ring2"), (2 * x - 1) * np.eye(k))
    H.add("H4", (0, "ring2"), (0, "Y1"), _inner_incidence(L, False, 1.0))
    H.add("H5", (0, "ring2"), (0, "Y2"), _outer_incidence(L, -x, -x))
    H.add("H6", (0, "Y1"), (0, "Y1"), _toeplitz_blocks(k, L.inner, -1.0))
    H.add("H7", (0, "Y2"), (0, "Y2"), _toeplitz_blocks(k, L.outer, x))
    return H


def assemble_M1(config: SpikeConfiguration, sig: SigmaConstants, psi1_ell: float = float("nan")) -> BlockMatrix:
    """In-plane matrix divided by psi1(ell)."""
    L = _check_layout(config, sig)
    k, ell = L.k, config.ell
    sn, cs = math.sin(math.pi / k), math.cos(math.pi / k)
    s1, s2, s3 = sig.sigma1, sig.sigma2, sig.sigma3
    lon = sn**2 + s2 / ell * cs**2       # ring edge seen along the radial direction
    tra = cs**2 + s2 / ell * sn**2       # ... along the radial-perpendicular direction
    M = BlockMatrix("M1", L, 2, psi1_ell, sig)
    # first component
    M.add("A11_1", (0, "ring1"), (0, "ring1"),
          _ring_circulant(k, -1 - s3 / sn * lon, s3 / (2 * sn) * (-sn**2 + s2 / ell * cs**2)))
    M.add("A11_3", (0, "ring2"), (0, "ring2"), (-1 + s3 / sn * lon) * np.eye(k))
    M.add("A12_1", (0, "ring1"), (0, "Y1"), _inner_incidence(L, True, 1.0))
    M.add("A12_2", (0, "ring2"), (0, "Y1"), _inner_incidence(L, False, 1.0))
    M.add("A12_3", (0, "ring2"), (0, "Y2"), _outer_incidence(L, s3 / 2, -s3 / 2))
    M.add("A13_1", (0, "Y1"), (0, "Y1"), _toeplitz_blocks(k, L.inner, -1.0))
    M.add("A13_2", (0, "Y2"), (0, "Y2"), _toeplitz_blocks(k, L.outer, s3 / (2 * sn)))
    # cross terms; the vertex-ring coupling is antisymmetric in the sector shift
    b = s3 * cs / 2 * (1 + s2 / ell)
    M.add("B11_1", (0, "ring1"), (1, "ring1"), _ring_circulant(k, 0.0, b, -b))
    v12 = -s2 * s3 * cs / (2 * ell * sn)
    M.add("B12_1", (0, "ring2"), (1, "Y2"), _outer_incidence(L, v12, v12))
    v21 = s3 * cs / (2 * sn)
    M.add("B21_1", (1, "ring2"), (0, "Y2"), _outer_incidence(L, v21, v21))
    # second component
    M.add("C11_1", (1, "ring1"), (1, "ring1"),
          _ring_circulant(k, -s1 / ell - s3 / sn * tra, s3 / (2 * sn) * (cs**2 - s2 / ell * sn**2)))
    M.add("C11_3", (1, "ring2"), (1, "ring2"), (-s1 / ell + s3 / sn * tra) * np.eye(k))
    M.add("C12_1", (1, "ring1"), (1, "Y1"), _inner_incidence(L, True, s1 / ell))
    M.add("C12_2", (1, "ring2"), (1, "Y1"), _inner_incidence(L, False, s1 / ell))
    M.add("C12_3", (1, "ring2"), (1, "Y2"), _outer_incidence(L, s2 * s3 / (2 * ell), -s2 * s3 / (2 * ell)))
    M.add("C13_1", (1, "Y1"), (1, "Y1"), _toeplitz_blocks(k, L.inner, -s1 / ell))
    M.add("C13_2", (1, "Y2"), (1, "Y2"), _toeplitz_blocks(k, L.outer, s2 * s3 / (2 * ell * sn)))
    return M


# ----------------------------------------------------------------------------
# pairwise assembly (independent route)

def _pair_kernel(d: float, e: np.ndarray, kvals, nplane: int) -> np.ndarray:
    p1, p2 = kvals(d)
    K = p2 * np.eye(nplane)
    K[:2, :2] += (p1 - p2) * np.outer(e, e)
    return K


def pairwise_matrix(config: SpikeConfiguration, kvals, dim: int | None = None) -> np.ndarray:
    """All N components at once, ordered (d1, d2, e_3, ..., e_N), unnormalized.

    ``kvals(distance) -> (psi1, psi2)``.
    """
    N = config.dim if dim is None else dim
    N = max(N, 2)
    ns = config.count
    dirs = np.zeros((N, ns, N))
    dirs[0, :, :2] = config.dir1
    dirs[1, :, :2] = config.dir2
    for alpha in range(2, N):
        dirs[alpha, :, alpha] = 1.0
    M = np.zeros((N * ns, N * ns))
    s = config.signs
    cache = {}
    for a, b, _ in config.neighbor_pairs():
        r = config.centers[a] - config.centers[b]
        d = float(np.linalg.norm(r))
        key = round(d, 9)
        if key not in cache:
            cache[key] = kvals(d)
        K = _pair_kernel(d, r / d, lambda _: cache[key], N)
        sab = s[a] * s[b]
        Da, Db = dirs[:, a, :], dirs[:, b, :]
        cross = sab * Da @ K @ Db.T
        ia = np.arange(N) * ns + a
        ib = np.arange(N) * ns + b
        M[np.ix_(ia, ib)] += cross
        M[np.ix_(ib, ia)] += cross.T
        M[np.ix_(ia, ia)] -= sab * Da @ K @ Da.T
        M[np.ix_(ib, ib)] -= sab * Db @ K @ Db.T
    return M


def table_kernel_values(table: KernelTable, exact: bool | None = None):
    def kvals(d):
        return table.value("psi1", d, exact), table.value("psi2", d, exact)
    return kvals


def pairwise_M1_H(config: SpikeConfiguration, table: KernelTable, exact: bool | None = None):
    """Normalized (M1, H_alpha) from the pairwise route plus the full matrix."""
    kv = table_kernel_values(table, exact)
    full = pairwise_matrix(config, kv, max(config.dim, 3))
    ns = config.count
    p1, p2 = kv(config.ell)
    return full[:2 * ns, :2 * ns] / p1, full[2 * ns:3 * ns, 2 * ns:3 * ns] / p2, full


# ----------------------------------------------------------------------------
# reductions

ReducedGrid = list  # q x q nested list of Circulant


def _kept_eliminated(B: BlockMatrix):
    keep, elim = [], []
    for c in range(B.components):
        keep += [(c, "ring1"), (c, "ring2")]
        elim += [(c, "Y1"), (c, "Y2")]
    return keep, elim


def _indices(B: BlockMatrix, fams) -> np.ndarray:
    return np.concatenate([np.arange(B.family_slice(*f).start, B.family_slice(*f).stop) for f in fams])


def schur_complement(B: BlockMatrix | np.ndarray, layout_of: BlockMatrix | None = None) -> np.ndarray:
    """Dense elimination of all segment interiors onto the vertex rings."""
    ref = B if isinstance(B, BlockMatrix) else layout_of
    dense = B.dense() if isinstance(B, BlockMatrix) else np.asarray(B)
    keep, elim = _kept_eliminated(ref)
    ik, ie = _indices(ref, keep), _indices(ref, elim)
    Akk = dense[np.ix_(ik, ik)]
    Ake = dense[np.ix_(ik, ie)]
    Aee = dense[np.ix_(ie, ie)]
    return Akk - Ake @ linalg.solve(Aee, Ake.T, assume_a="sym")


def eliminate_segments(B: BlockMatrix) -> np.ndarray:
    """Elimination through the boundary vectors of the Toeplitz blocks.

    Each interior family must be a multiple of block-diagonal T and must not
    couple to any other interior family; its couplings to the rings touch
    only the first and last point of each segment, so only the corner
    entries of T^{-1} (read off the boundary vectors) are needed.
    """
    dense = B.dense()
    keep, elim = _kept_eliminated(B)
    ik = _indices(B, keep)
    S = dense[np.ix_(ik, ik)].copy()
    for f in elim:
        sl = B.family_slice(*f)
        nbar = B.layout.inner if f[1] == "Y1" else B.layout.outer
        D = dense[sl, sl]
        coef = D[0, 0] / 2.0
        if np.max(np.abs(D - _toeplitz_blocks(B.layout.k, nbar, coef))) > 1e-13 * max(1.0, abs(coef)):
            raise LayoutMismatch(f"interior block {f} is not a multiple of block-diagonal T")
        for g in elim:
            if g != f and np.any(dense[sl, B.family_slice(*g)]):
                raise LayoutMismatch(f"interior families {f} and {g} are coupled")
        C = dense[np.ix_(ik, np.arange(sl.start, sl.stop))]
        up, down = boundary_vectors(nbar)
        # T^{-1} restricted to first/last rows and columns
        corner = np.array([[up[0], up[-1]], [down[0], down[-1]]])
        for blk in range(B.layout.k):
            cols = [blk * nbar, blk * nbar + nbar - 1]
            Cb = C[:, cols]
            if nbar == 1:
                S -= np.outer(Cb[:, 0], Cb[:, 0]) * (up[0] / coef)
            else:
                S -= Cb @ corner @ Cb.T / coef
    return S


def grid_from_dense(S: np.ndarray, k: int) -> ReducedGrid:
    from .structured import split_block_circulant

    return split_block_circulant(S, k, atol=1e-10)


def reduced_H_rows(sig: SigmaConstants, m: int, n: int) -> dict[str, np.ndarray]:
    """Closed-form first rows of the 2 x 2 reduced circulant system."""
    k = sig.k
    sn = math.sin(math.pi / k)
    d = sig.delta2
    r1, r2, r3 = np.zeros(k), np.zeros(k), np.zeros(k)
    r1[0], r1[1], r1[-1] = -1 / m - d / sn, d / (2 * sn), d / (2 * sn)
    r2[0] = 1 / m
    r3[0], r3[1], r3[-1] = -1 / m + d / (2 * n * sn), -d / (4 * n * sn), -d / (4 * n * sn)
    return {"H1": r1, "H2": r2, "H3": r3}


def reduced_F_rows(sig: SigmaConstants, m: int, n: int) -> dict[str, np.ndarray]:
    """Closed-form first rows of the 4 x 4 reduced circulant system.

    The coupling between the y_{m+1} ring components (F24) carries cos(pi/k),
    consistent with its eigenvalue list.
    """
    k, ell = sig.k, sig.ell
    sn, cs = math.sin(math.pi / k), math.cos(math.pi / k)
    s1, s2, s3 = sig.sigma1, sig.sigma2, sig.sigma3
    lon = sn**2 + s2 / ell * cs**2
    lon_m = -sn**2 + s2 / ell * cs**2
    tra = cs**2 + s2 / ell * sn**2
    tra_m = cs**2 - s2 / ell * sn**2
    z = lambda: np.zeros(k)
    F = {name: z() for name in ("F11", "F12", "F13", "F22", "F24", "F33", "F34", "F44")}
    F["F11"][0], F["F11"][1], F["F11"][-1] = -1 / m - s3 / sn * lon, s3 / (2 * sn) * lon_m, s3 / (2 * sn) * lon_m
    F["F12"][0] = 1 / m
    b = s3 * cs / 2 * (1 + s2 / ell)
    F["F13"][1], F["F13"][-1] = b, -b
    F["F22"][0] = -1 / m + s3 / (2 * n * sn) * lon
    F["F22"][1] = F["F22"][-1] = s3 / (4 * n * sn) * (sn**2 - s2 / ell * cs**2)
    c24 = s3 * cs / (4 * n) * (1 + s2 / ell)
    F["F24"][1], F["F24"][-1] = -c24, c24
    F["F33"][0] = -s1 / (m * ell) - s3 / sn * tra
    F["F33"][1] = F["F33"][-1] = s3 / (2 * sn) * tra_m
    F["F34"][0] = s1 / (m * ell)
    F["F44"][0] = -s1 / (m * ell) + s3 / (2 * n * sn) * tra
    F["F44"][1] = F["F44"][-1] = -s3 / (4 * n * sn) * tra_m
    return F


def _transpose_row(row: np.ndarray) -> np.ndarray:
    # first row of Cir(row)^T
    return np.roll(row[::-1], 1)


def reduce_H_alpha(H: BlockMatrix) -> np.ndarray:
    """2k x 2k reduced matrix [[H1, H2], [H2^T, H3]] from the closed-form rows."""
    r = reduced_H_rows(H.sigmas, H.layout.m, H.layout.n)
    C = lambda row: Circulant(row).dense()
    return np.block([[C(r["H1"]), C(r["H2"])], [C(_transpose_row(r["H2"])), C(r["H3"])]])


def reduce_M1(M: BlockMatrix) -> np.ndarray:
    """4k x 4k reduced matrix F from the closed-form rows, unknowns ordered
    (ring1 c1, ring2 c1, ring1 c2, ring2 c2)."""
    F = reduced_F_rows(M.sigmas, M.layout.m, M.layout.n)
    k = M.layout.k
    C = lambda row: Circulant(row).dense()
    T = lambda name: C(_transpose_row(F[name]))
    Z = np.zeros((k, k))
    return np.block([
        [C(F["F11"]), C(F["F12"]), C(F["F13"]), Z],
        [T("F12"), C(F["F22"]), Z, C(F["F24"])],
        [T("F13"), Z, C(F["F33"]), C(F["F34"])],
        [Z, T("F24"), T("F34"), C(F["F44"])],
    ])


# ----------------------------------------------------------------------------
# kernel vectors

@dataclass(frozen=True)
class KernelBasis:
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    w4: np.ndarray
    w5: np.ndarray
    w6: np.ndarray

    def in_plane(self) -> np.ndarray:
        return np.column_stack([self.w1, self.w2, self.w3])

    def out_of_plane(self) -> np.ndarray:
        return np.column_stack([self.w4, self.w5, self.w6])


def build_symmetry_kernels(config: SpikeConfiguration) -> KernelBasis:
    """Coefficient vectors of translations and rotations in the canonical layout.

    w1, w2: translations along x1, x2 projected on the local frames;
    w3: in-plane rotation, J y projected on the frames (J y = (-y2, y1));
    w4: all ones; w5, w6: x1 and x2 coordinates of the centers (rotations
    mixing x1 or x2 with an out-of-plane axis).
    """
    y = config.centers
    d1, d2 = config.dir1, config.dir2
    Jy = np.column_stack([-y[:, 1], y[:, 0]])
    stack = lambda u: np.concatenate([u @ d1.T if u.ndim == 1 else np.sum(u * d1, axis=1),
                                      u @ d2.T if u.ndim == 1 else np.sum(u * d2, axis=1)])
    return KernelBasis(stack(np.array([1.0, 0.0])), stack(np.array([0.0, 1.0])), stack(Jy),
                       np.ones(config.count), y[:, 0].copy(), y[:, 1].copy())


def kernel_residuals(matrix: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """||A w||_inf / ||w||_inf for each column w."""
    return np.max(np.abs(matrix @ vectors), axis=0) / np.max(np.abs(vectors), axis=0)


# ----------------------------------------------------------------------------
# quadrature oracle for single entries

def _direction(config: SpikeConfiguration, a: int, comp) -> np.ndarray:
    if comp in (1, "1"):
        return config.dir1[a]
    if comp in (2, "2"):
        return config.dir2[a]
    return None     # out-of-plane


def entry_oracle(config: SpikeConfiguration, profile, row: tuple[int, object], col: tuple[int, object],
                 opts=None) -> float:
    """One unnormalized entry from lab-frame quadrature of neighbor pairs.

    ``row`` and ``col`` are (point index, component) with component 1, 2 or
    'alpha' (any out-of-plane axis). The entry couples the two spikes through
    int p w^{p-1}(x - y_a) (u . grad w(x - y_a)) (v . grad w(x - y_b)) dx,
    which is u . G(y_b - y_a) . v in terms of the lab moments.
    """
    a, ca = row
    b, cb = col
    s = config.signs
    neighbors: dict[int, list[int]] = {}
    for p_, q_, _ in config.neighbor_pairs():
        neighbors.setdefault(p_, []).append(q_)
        neighbors.setdefault(q_, []).append(p_)
    perp_a, perp_b = ca not in (1, 2, "1", "2"), cb not in (1, 2, "1", "2")
    if perp_a != perp_b:
        return 0.0

    def moment(u, v, src, dst):
        r = config.centers[dst] - config.centers[src]
        d = float(np.linalg.norm(r))
        mom = interaction_tensor(profile, round(d, 12), r / d, opts)
        if perp_a:
            return mom.G_perp
        return float(u @ mom.G @ v)

    ua, ub = _direction(config, a, ca), _direction(config, b, cb)
    if a == b:
        return -sum(s[a] * s[z] * moment(ua, ub, a, z) for z in neighbors.get(a, []))
    if b not in neighbors.get(a, []):
        return 0.0
    return s[a] * s[b] * moment(ua, ub, a, b)
