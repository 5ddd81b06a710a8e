import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import support
from spike_spectra import assemble_H_alpha, assemble_M1, nondegeneracy_report
from spike_spectra.errors import AmbiguousThreshold, DegenerateFrequency
from spike_spectra.matrices import reduce_H_alpha, reduce_M1
from spike_spectra.spectral import (SpectralReport, compare_Di, count_kernel, det_Di_closed_form, det_Di_exact,
                                    det_Dfj_closed_form, frequency_blocks, gap_scaling_fit, log_det_split,
                                    null_space_report, summarize, write_det_csv)


@pytest.fixture(scope="module")
def reduced():
    cfg, sig, _ = support.balanced(8, 14, 6, 3)
    return cfg, sig, reduce_H_alpha(assemble_H_alpha(cfg, sig)), reduce_M1(assemble_M1(cfg, sig))


def test_frequency_blocks_reassemble(reduced):
    cfg, _, RH, RM = reduced
    for R, q in ((RH, 2), (RM, 4)):
        blocks, err = frequency_blocks(R, cfg.k)
        assert err <= 1e-12
        assert [b.freq for b in blocks] == list(range(cfg.k))
        assert all(b.matrix.shape == (q, q) for b in blocks)


def test_log_det_is_multiplicative(reduced):
    # shift away from the kernel so that both sides are finite
    cfg, _, RH, RM = reduced
    for R in (RH, RM):
        shifted = R + 0.3 * np.eye(R.shape[0])
        blocks, _ = frequency_blocks(shifted, cfg.k)
        full, split = log_det_split(shifted, blocks)
        assert split == pytest.approx(full, abs=1e-9)


def test_Di_exact_and_zeros(reduced):
    cfg, sig, RH, _ = reduced
    blocks, _ = frequency_blocks(RH, cfg.k)
    for b in blocks:
        assert det_Di_exact(b.freq, sig, cfg.m, cfg.n) == pytest.approx(b.det.real, abs=1e-14)
    rows = compare_Di(sig, cfg.m, cfg.n, blocks)
    assert all(abs(r.det_numeric) <= 1e-14 for r in rows if r.j in (0, 1, cfg.k - 1))
    assert all(r.det_numeric < 0 for r in rows if 2 <= r.j <= cfg.k - 2)


@given(st.integers(7, 16), st.floats(0.01, 1.0), st.integers(1, 40))
def test_Di_closed_form_sign_and_zeros(k, delta2, n):
    assert det_Di_closed_form(0, delta2, n, k) == 0.0
    assert det_Di_closed_form(1, delta2, n, k) == pytest.approx(0.0, abs=1e-15)
    assert det_Di_closed_form(k - 1, delta2, n, k) == pytest.approx(0.0, abs=1e-15)
    for i in range(2, k - 1):
        assert det_Di_closed_form(i, delta2, n, k) < 0


def test_Df_closed_form_degenerate_frequencies():
    a = math.sin(math.pi / 8) ** 2
    with pytest.raises(DegenerateFrequency):
        det_Dfj_closed_form(0, a, 0.0, -0.1, -0.1, 1.0, 6)
    # b = 1 (j = k/2) divides by zero in the closed form
    with pytest.raises(DegenerateFrequency):
        det_Dfj_closed_form(4, a, 1.0, -0.1, -0.1, 1.0, 6)
    assert math.isfinite(det_Dfj_closed_form(2, a, 0.5, -0.1, -0.1, 1.0, 6))


def test_det_csv(tmp_path, reduced):
    cfg, sig, RH, _ = reduced
    rows = compare_Di(sig, cfg.m, cfg.n, frequency_blocks(RH, cfg.k)[0])
    path = tmp_path / "d.csv"
    write_det_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "j,det_numeric,det_closed_form,rel_err"
    assert len(lines) == cfg.k + 1


@given(st.integers(1, 6), st.integers(3, 12), st.floats(1e-14, 1e-6), st.floats(1e3, 1e8))
def test_count_kernel_on_synthetic_spectra(dim, rest, small, ratio):
    sv = np.concatenate([small * np.linspace(0.5, 1.0, dim), small * ratio * np.linspace(1.0, 4.0, rest)])
    got, thr, gap, r = count_kernel(np.random.default_rng(0).permutation(sv))
    assert got == dim
    assert small < thr < small * ratio
    assert gap == pytest.approx(small * ratio)


def test_count_kernel_ambiguous():
    with pytest.raises(AmbiguousThreshold):
        count_kernel(np.geomspace(1e-3, 1, 10))
    with pytest.raises(AmbiguousThreshold):
        count_kernel(np.array([1.0]))


def test_null_space_report_on_known_matrix():
    rng = np.random.default_rng(1)
    Q, _ = np.linalg.qr(rng.standard_normal((9, 9)))
    A = Q @ np.diag([0, 0, 1e-15, 1, 2, 3, 4, 5, 6]) @ Q.T
    rep = null_space_report(A, Q[:, :3], "toy")
    assert rep.kernel_dim == 3
    assert rep.max_principal_angle <= 1e-8
    assert rep.max_residual <= 1e-14
    assert max(rep.solvability_products) <= 1e-14
    back = SpectralReport.from_dict(rep.to_dict())
    assert back.to_dict() == rep.to_dict()


def test_gap_scaling_fit_recovers_power_law():
    ells = np.array([8.0, 11.0, 15.0, 21.0])
    C, tau = gap_scaling_fit(ells, 3.5 * ells ** -2.25)
    assert C == pytest.approx(3.5)
    assert tau == pytest.approx(2.25)


def test_summarize_counts_out_of_plane_matrix_once_per_axis():
    def fake(dim, gap=1.0):
        return SpectralReport("x", dim, gap, 1e-6, 1e6, [0.0] * dim, kernel_residuals=[1e-15])
    assert summarize({"M1": fake(3)}, 2, {}, {}).passed
    rep = summarize({"M1": fake(3), "Halpha": fake(3)}, 5, {}, {})
    assert rep.passed and rep.total_kernel_dim == 12
    bad = summarize({"M1": fake(3), "Halpha": fake(4)}, 3, {}, {})
    assert not bad.passed and len(bad.reasons) == 2
    assert not summarize({"M1": fake(3, gap=1e-14)}, 2, {}, {}).passed


def test_two_dimensional_total():
    cfg, _, _ = support.balanced(8, 14, 6, 2)
    rep = nondegeneracy_report(cfg, support.table(2))
    assert rep.passed
    assert set(rep.reports) == {"M1"}
    assert rep.total_kernel_dim == 3
