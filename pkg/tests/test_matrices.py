import numpy as np
import pytest

import support
from spike_spectra import assemble_H_alpha, assemble_M1, build_symmetry_kernels
from spike_spectra.errors import LayoutMismatch
from spike_spectra.matrices import (eliminate_segments, entry_oracle, grid_from_dense, kernel_residuals,
                                    pairwise_M1_H, reduce_H_alpha, reduce_M1, schur_complement)

CASES = [(8, 14, 6), (12, 9, 3), (8, 37, 15)]


@pytest.fixture(scope="module", params=CASES, ids=lambda c: "k%d-m%d-n%d" % c)
def assembled(request):
    k, m, n = request.param
    cfg, sig, bal = support.balanced(k, m, n, 3)
    tab = support.table(3)
    H = assemble_H_alpha(cfg, sig, tab.value("psi2", bal.ell))
    M = assemble_M1(cfg, sig, tab.value("psi1", bal.ell))
    return cfg, sig, H, M


def test_symmetric(assembled):
    _, _, H, M = assembled
    for B in (H, M):
        D = B.dense()
        assert np.array_equal(D, D.T)
        assert D.shape == (B.size, B.size)


def test_symmetry_vectors_are_kernels(assembled):
    cfg, _, H, M = assembled
    kb = build_symmetry_kernels(cfg)
    assert np.max(kernel_residuals(H.dense(), kb.out_of_plane())) <= 1e-12
    assert np.max(kernel_residuals(M.dense(), kb.in_plane())) <= 1e-12


def test_display_matches_pairwise(assembled):
    cfg, _, H, M = assembled
    Mp, Hp, _ = pairwise_M1_H(cfg, support.table(3))
    assert np.max(np.abs(Hp - H.dense())) <= 1e-12
    assert np.max(np.abs(Mp - M.dense())) <= 1e-12


def test_three_reduction_routes_agree(assembled):
    _, _, H, M = assembled
    for B, reducer in ((H, reduce_H_alpha), (M, reduce_M1)):
        dense = schur_complement(B)
        assert np.max(np.abs(eliminate_segments(B) - dense)) <= 1e-12
        assert np.max(np.abs(reducer(B) - dense)) <= 1e-10


def test_reduced_is_block_circulant(assembled):
    cfg, _, H, M = assembled
    grid = grid_from_dense(reduce_M1(M), cfg.k)
    assert len(grid) == 4 and all(len(row) == 4 for row in grid)
    assert len(grid_from_dense(reduce_H_alpha(H), cfg.k)) == 2


def test_manifest_lists_blocks():
    cfg, sig, _ = support.balanced(8, 14, 6, 3)
    man = assemble_H_alpha(cfg, sig).manifest()
    assert set(man["blocks"]) == {f"H{i}" for i in range(1, 8)}
    assert man["blocks"]["H2"]["shape"] == [cfg.k, cfg.k * (cfg.m - 1)]
    man = assemble_M1(cfg, sig).manifest()
    assert man["components"] == 2 and "B11_1" in man["blocks"]


def test_layout_mismatch():
    cfg, _, _ = support.balanced(8, 14, 6, 3)
    _, other, _ = support.balanced(8, 37, 15, 3)
    with pytest.raises(LayoutMismatch):
        assemble_H_alpha(cfg, other)
    with pytest.raises(LayoutMismatch):
        assemble_M1(cfg, other)


def test_entry_oracle_spot_check():
    # one vertex-ring entry per matrix; the full sample runs in the acceptance suite
    cfg, sig, bal = support.balanced(8, 14, 6, 3)
    tab = support.table(3)
    prof = support.profile(3)
    H = assemble_H_alpha(cfg, sig, tab.value("psi2", bal.ell))
    L = cfg.layout
    a, b = L.ring1(0), L.index(0, 2)
    oracle = entry_oracle(cfg, prof, (a, "alpha"), (b, "alpha")) / H.scale
    assert support.rel(H.dense()[a, b], oracle) <= 2e-2
    assert entry_oracle(cfg, prof, (a, 1), (b, "alpha")) == 0.0
