import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import support
from reference_values import KERNELS_N3_P3
from spike_spectra import KernelTable, QuadratureOptions, kernel_values, psi, psi1, psi2, sigma_constants
from spike_spectra.errors import OutOfRange, QuadratureFailure
from spike_spectra.kernels import KernelEvaluator, projection_decomposition, sphere_area, table_nodes


@pytest.mark.parametrize("s", sorted(KERNELS_N3_P3))
def test_kernels_match_independent_quadrature(s):
    got = kernel_values(support.profile(3), s)
    for value, ref in zip(got.as_tuple(), KERNELS_N3_P3[s]):
        assert support.rel(value, ref) <= 1e-8


def test_sphere_areas():
    assert sphere_area(0) == pytest.approx(2.0)
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("s", [7.0, 13.0])
def test_signs_and_exact_identities(dim, s):
    prof = support.profile(dim)
    v = kernel_values(prof, s)
    assert v.psi > 0 and v.psi2 > 0 and v.psi1 < 0
    # s psi2 = psi holds exactly (integration by parts)
    assert support.rel(s * v.psi2, v.psi) <= 1e-12
    # psi1 is the derivative of psi; compare with a central difference
    h = 1e-3
    fd = (psi(prof, s + h) - psi(prof, s - h)) / (2 * h)
    assert support.rel(fd, v.psi1) <= 1e-6


def test_lab_route_matches_axial_route():
    prof = support.profile(3)
    e = support.unit(0.3)
    mom = __import__("spike_spectra").interaction_tensor(prof, 10.0, e)
    assert support.rel(psi(prof, 10.0, e), psi(prof, 10.0)) <= 1e-10
    f = np.array([-e[1], e[0]])
    assert support.rel(e @ mom.G @ e, psi1(prof, 10.0)) <= 1e-10
    assert support.rel(f @ mom.G @ f, psi2(prof, 10.0)) <= 1e-10
    # the out-of-plane moment is the transverse kernel as well
    assert support.rel(mom.G_perp, psi2(prof, 10.0)) <= 1e-10


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi),
       st.floats(-5, -1e-3), st.floats(1e-3, 5))
def test_projection_decomposition_algebra(ta, tb, te, k1, k2):
    a, b, e = support.unit(ta), support.unit(tb), support.unit(te)
    f = np.array([-e[1], e[0]])
    G = k1 * np.outer(e, e) + k2 * np.outer(f, f)
    assert projection_decomposition(k1, k2, a, b, e) == pytest.approx(a @ G @ b, abs=1e-12)


def test_table_interpolation_error():
    tab = support.table(3)
    ev = tab.evaluator
    mids = 0.5 * (tab.s[:-1] + tab.s[1:])[::9]
    for s in mids:
        exact = ev.values(float(s))
        for name in ("psi", "psi1", "psi2"):
            assert support.rel(float(tab.interpolate(name, s)), getattr(exact, name)) <= 1e-8


@given(st.floats(6.0, 24.0), st.floats(6.0, 24.0))
def test_interpolated_magnitudes_decrease(s1, s2):
    tab = support.table(3)
    lo, hi = sorted((s1, s2))
    if hi - lo < 1e-9:
        return
    for name in ("psi", "psi1", "psi2"):
        assert abs(float(tab.interpolate(name, lo))) > abs(float(tab.interpolate(name, hi)))


def test_invariant_report():
    rep = support.table(3).invariant_report()
    assert rep["positive"]
    assert all(rep["decreasing"].values())
    assert rep["transverse_ratio_decreasing"]
    lo, hi = rep["psi1_over_psi_range"]
    assert -1.2 < lo < hi < -1.0


def test_table_nodes_respect_spacing():
    nodes = table_nodes(6, 24, 0.25)
    assert nodes[0] == 6 and nodes[-1] == pytest.approx(24)
    assert np.max(np.diff(nodes)) <= 0.25 + 1e-12


def test_csv_roundtrip(tmp_path):
    tab = support.table(3)
    path = tmp_path / "k.csv"
    tab.to_csv(path)
    back = KernelTable.from_csv(path, tab.metadata())
    assert np.array_equal(back.s, tab.s)
    assert np.array_equal(back.psi1, tab.psi1)
    x = 11.137
    assert float(back.interpolate("psi2", x)) == float(tab.interpolate("psi2", x))
    with pytest.raises(ValueError):
        back.attach(support.profile(2))


def test_range_errors():
    prof = support.profile(3)
    with pytest.raises(OutOfRange):
        kernel_values(prof, 1.5)
    with pytest.raises(OutOfRange):
        support.table(3).interpolate("psi", 30.0)
    with pytest.raises(OutOfRange):
        table_nodes(1.0, 5.0)


def test_quadrature_failure_is_reported():
    ev = KernelEvaluator(support.profile(3), QuadratureOptions(order=4, check_order=6, quad_tol=1e-14))
    with pytest.raises(QuadratureFailure):
        ev.values(9.0)


def test_sigma_constants():
    tab = support.table(3)
    _, sig, bal = support.balanced(8, 14, 6, 3)
    assert sig.sigma1 < 0 and sig.sigma2 < 0
    assert sig.delta2 > 0
    assert sig.sigma3 == pytest.approx(1.003, abs=5e-3)
    assert sig.sigma3_fd_rel_diff <= 1e-6
    with pytest.raises(OutOfRange):
        sigma_constants(tab, bal.ell, bal.ell_bar, 6)
    small = sigma_constants(tab, bal.ell, bal.ell_bar, 6, diagnostic=True)
    assert small.diagnostic
