import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import support
from spike_spectra import Layout, SpikeConfiguration, build_configuration, solve_balancing, suggest_mn
from spike_spectra.configuration import asymptotic_ell_bar, ratio_of_spacings
from spike_spectra.errors import ConstraintViolation, EmptyResult, InvalidParams, NoRoot

layouts = st.builds(Layout, st.integers(7, 16), st.integers(2, 30), st.integers(1, 15))


@given(layouts)
def test_layout_index_is_a_bijection(L):
    idx = [L.index(i, j) for i, j in L.labels()]
    assert sorted(idx) == list(range(L.size))
    assert L.size == L.k * (L.m + 2 * L.n)
    sl = L.block_slices()
    assert sum(s.stop - s.start for s in sl.values()) == L.size


@given(st.integers(7, 14), st.integers(4, 40), st.data())
def test_asymptotic_geometry_is_consistent(k, m, data):
    sn = math.sin(math.pi / k)
    n = data.draw(st.integers(max(1, math.ceil(sn * m + 0.51)), max(2, math.ceil(sn * m + 0.51)) + 4))
    if ratio_of_spacings(k, m, n) <= 1:
        return
    lb = asymptotic_ell_bar(k, m, n)
    cfg = build_configuration(k, m, n, ratio_of_spacings(k, m, n) * lb, lb, dim=2)
    assert cfg.count == k * (m + 2 * n)
    assert max(cfg.spacing_errors().values()) <= 1e-10
    assert cfg.closure_residual() <= 1e-9 * lb
    # k-fold symmetry: rotating sector 0 gives sector 1
    L = cfg.layout
    th = 2 * math.pi / k
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    assert np.allclose(R @ cfg.centers[L.ring1(0)], cfg.centers[L.ring1(1)])


def test_signs_alternate_on_outer_edges():
    cfg, _, _ = support.balanced(8, 14, 6, 3)
    L = cfg.layout
    outer = [cfg.signs[L.index(0, j)] for j in range(cfg.m + 1, cfg.m + 2 * cfg.n + 1)]
    assert outer == [(-1) ** t for t in range(len(outer))]
    inner = [cfg.signs[L.index(0, j)] for j in range(1, cfg.m + 2)]
    assert set(inner) == {1}


def test_neighbor_graph_is_a_closed_chain():
    cfg, _, _ = support.balanced(8, 14, 6, 3)
    deg = np.zeros(cfg.count, dtype=int)
    for a, b, _ in cfg.neighbor_pairs():
        deg[a] += 1
        deg[b] += 1
    L = cfg.layout
    # ring1 and ring2 points are junctions of three segments
    junctions = {L.ring1(i) for i in range(cfg.k)} | {L.ring2(i) for i in range(cfg.k)}
    assert all(deg[a] == (3 if a in junctions else 2) for a in range(cfg.count))


@pytest.mark.parametrize("k, m, n", [(8, 14, 6), (8, 50, 20), (12, 9, 3), (7, 49, 22)])
def test_balancing_residuals(k, m, n):
    bal = solve_balancing(support.table(3), k, m, n)
    assert bal.force_residual <= 1e-9
    assert bal.linear_residual <= 1e-9
    assert bal.polished


def test_balancing_regression():
    # frozen from the numeric root with direct-quadrature polishing
    bal = solve_balancing(support.table(3), 8, 14, 6)
    assert bal.ell == pytest.approx(9.21, abs=0.01)
    assert bal.ell - bal.ell_bar == pytest.approx(0.24, abs=0.01)


def test_numeric_close_to_asymptotic():
    tab = support.table(3)
    gaps = []
    for m, n in [(14, 6), (50, 20), (94, 37)]:
        num = solve_balancing(tab, 8, m, n)
        asym = solve_balancing(tab, 8, m, n, mode="asymptotic")
        gaps.append(abs(num.ell - asym.ell) / num.ell)
        assert asym.force_residual > num.force_residual
    # the leading-order closure improves as the spacing grows
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[-1] <= 0.1


def test_unbalanceable_pairs():
    tab = support.table(3)
    with pytest.raises(NoRoot):
        solve_balancing(tab, 8, 12, 11)
    with pytest.raises(NoRoot):
        solve_balancing(tab, 8, 30, 5)
    with pytest.raises(InvalidParams):
        solve_balancing(tab, 6, 14, 6)
    # root would lie beyond the tabulated range
    with pytest.raises(NoRoot):
        solve_balancing(tab, 8, 150, 58)


def test_strict_constraint():
    with pytest.raises(ConstraintViolation):
        build_configuration(8, 14, 6, 9.0, 9.0)
    with pytest.raises(InvalidParams):
        build_configuration(6, 14, 6, 9.0, 9.0, strict=False)


def test_suggest_mn():
    tab = support.table(3)
    cands = suggest_mn(8, 12.0, tab, max_m=60)
    assert cands and all(abs(c.ell - 12) <= 1.2 for c in cands)
    assert all(c.numeric for c in cands)
    with pytest.raises(EmptyResult):
        suggest_mn(8, 12.0, tab, max_m=5)


def test_suggest_mn_scaling():
    # m and n grow linearly with ell, with n/m close to sin(pi/k)
    med = {}
    for target in (10.0, 20.0):
        cands = suggest_mn(8, target)
        ms = sorted(c.m for c in cands)
        med[target] = ms[len(ms) // 2]
        assert all(abs(c.n / c.m - math.sin(math.pi / 8)) <= 0.1 for c in cands if c.m >= 20)
    assert 1.4 <= med[20.0] / med[10.0] <= 2.8


def test_dict_roundtrip():
    cfg, _, _ = support.balanced(8, 14, 6, 3)
    back = SpikeConfiguration.from_dict(cfg.to_dict())
    assert np.array_equal(back.centers, cfg.centers)
    assert back.to_dict() == cfg.to_dict()
