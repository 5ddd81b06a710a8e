"""Frequency block-diagonalization, determinant formulas and kernel certification."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from .configuration import SpikeConfiguration, build_configuration, solve_balancing, suggest_mn
from .errors import AmbiguousThreshold, DegenerateFrequency
from .io import ensure_parent
from .kernels import KernelTable, SigmaConstants, sigma_constants
from .matrices import (
    assemble_H_alpha,
    assemble_M1,
    build_symmetry_kernels,
    kernel_residuals,
    reduce_H_alpha,
    reduce_M1,
)
from .structured import block_dft_conjugate, block_dft_reassemble

GAP_RATIO = 100.0


@dataclass(frozen=True)
class FrequencyBlock:
    freq: int
    matrix: np.ndarray
    det: complex
    singular_values: np.ndarray


def frequency_blocks(reduced: np.ndarray, k: int) -> tuple[list[FrequencyBlock], float]:
    """Per-frequency blocks of a grid of circulants plus the reassembly error."""
    D = block_dft_conjugate(np.asarray(reduced), k)
    err = float(np.max(np.abs(block_dft_reassemble(D) - reduced)))
    out = [FrequencyBlock(j, D[j], complex(np.linalg.det(D[j])), np.linalg.svd(D[j], compute_uv=False))
           for j in range(k)]
    return out, err


def log_det_split(reduced: np.ndarray, blocks: list[FrequencyBlock]) -> tuple[float, float]:
    """log|det| of the reduced matrix and the sum of log|det| over its frequency blocks."""
    _, full = np.linalg.slogdet(reduced)
    return float(full), float(sum(np.log(abs(b.det)) for b in blocks))


# ----------------------------------------------------------------------------
# closed forms

def det_Di_closed_form(i: int, delta2: float, n: int, k: int) -> float:
    b = math.sin(math.pi * i / k) ** 2
    a = math.sin(math.pi / k) ** 2
    return 2 * delta2 / n * b * (1 - b / a)


def det_Di_exact(i: int, sig: SigmaConstants, m: int, n: int) -> float:
    """Determinant of the 2 x 2 block from its entries, written out."""
    k = sig.k
    sn = math.sin(math.pi / k)
    c = math.cos(2 * math.pi * i / k)
    h1 = sig.delta2 / sn * (c - 1) - 1 / m
    h3 = sig.delta2 / (4 * n * sn) * (2 - 2 * c) - 1 / m
    return h1 * h3 - 1 / m**2


def det_Dfj_closed_form(j: int, a: float, b: float, d1: float, d2: float, sigma3: float, n: int,
                        form: str = "simplified") -> float:
    """Leading-order closed-form determinant of the j-th 4 x 4 block.

    a = sin^2(pi/k), b = sin^2(j pi/k), d1 = sigma1/ell, d2 = sigma2/ell.
    ``form='full'`` evaluates the unsimplified product of two fractions.
    """
    if b == 0.0 or j == 0:
        raise DegenerateFrequency("the closed form divides by sin^2(j pi/k); j = 0 is numeric only")
    try:
        if form == "simplified":
            return (a - b) ** 2 * n * d2 / (2 * sigma3**2 * a**3 * b**3 * (1 - a) * (b - 1) ** 4)
        if form == "full":
            f1 = n / (2 * sigma3**2 * (1 + d2) ** 2 * (1 - a) * (1 - b) * b
                      * (a * (1 - b) + d2 * (1 - a) * d1) * (b - (1 - a) * b * d2 / a))
            f2 = ((a - b) ** 2 * d2 * (b * d2 + a**2 * (1 + d1) * (1 + d2) - a * (1 + (2 + d1) * d2))
                  / (a * b * (1 - a) * (1 - b) * (1 + d2) ** 2 * (a + (a - 1) * d2)
                     * (a * (b - 1) + (a - 1) * b * d2)))
            return f1 * f2
    except ZeroDivisionError as exc:
        raise DegenerateFrequency(f"closed form is singular at j = {j} (sin^2(j pi/k) = {b})") from exc
    raise ValueError(f"unknown form {form!r}")


def _freq_args(sig: SigmaConstants, j: int):
    return (math.sin(math.pi / sig.k) ** 2, math.sin(math.pi * j / sig.k) ** 2,
            sig.sigma1 / sig.ell, sig.sigma2 / sig.ell, sig.sigma3)


def _is_trivial_frequency(j: int, k: int) -> bool:
    """Frequencies 0, 1 and k - 1 carry the symmetry kernels."""
    return j % k in (0, 1, k - 1)


@dataclass(frozen=True)
class DetRow:
    j: int
    det_numeric: float
    det_closed_form: float
    rel_err: float
    det_imag: float = 0.0


def compare_Di(sig: SigmaConstants, m: int, n: int, blocks: list[FrequencyBlock]) -> list[DetRow]:
    rows = []
    for b in blocks:
        num = b.det.real
        if _is_trivial_frequency(b.freq, sig.k):
            cf, rel = 0.0, float("nan")
        else:
            cf = det_Di_closed_form(b.freq, sig.delta2, n, sig.k)
            rel = abs(num - cf) / abs(cf)
        rows.append(DetRow(b.freq, num, cf, rel, b.det.imag))
    return rows


def compare_Dfj(sig: SigmaConstants, n: int, blocks: list[FrequencyBlock], form: str = "simplified") -> list[DetRow]:
    rows = []
    for b in blocks:
        num = b.det.real
        if _is_trivial_frequency(b.freq, sig.k):
            cf = 0.0 if b.freq else float("nan")
        else:
            try:
                cf = det_Dfj_closed_form(b.freq, *_freq_args(sig, b.freq), n, form)
            except DegenerateFrequency:
                cf = float("nan")
        rel = abs(num - cf) / abs(cf) if cf != 0.0 and math.isfinite(cf) else float("nan")
        rows.append(DetRow(b.freq, num, cf, rel, b.det.imag))
    return rows


def write_det_csv(rows: list[DetRow], path) -> None:
    ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["j", "det_numeric", "det_closed_form", "rel_err"])
        for r in rows:
            wr.writerow([r.j, repr(r.det_numeric), repr(r.det_closed_form), repr(r.rel_err)])


# ----------------------------------------------------------------------------
# kernel certification

@dataclass
class SpectralReport:
    matrix_id: str
    kernel_dim: int
    gap: float
    threshold: float
    gap_ratio: float
    smallest_singular_values: list
    kernel_residuals: list = field(default_factory=list)
    max_principal_angle: float = float("nan")
    frequency_kernel_count: int | None = None
    det_table: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    # max |<w, A x>| over unit x, relative to ||w|| ||A||: how far the range
    # is from orthogonal to each candidate kernel vector
    solvability_products: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.kernel_residuals) if self.kernel_residuals else 0.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["det_table"] = [dict(r.__dict__) for r in self.det_table]
        d["max_residual"] = self.max_residual
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralReport":
        data = {k: v for k, v in data.items() if k != "max_residual"}
        data["det_table"] = [DetRow(**r) for r in data.get("det_table", [])]
        return cls(**data)


def count_kernel(singular_values: np.ndarray, gap_ratio: float = GAP_RATIO):
    """(dim, threshold, gap, ratio) from the largest consecutive ratio of singular values."""
    sv = np.sort(np.asarray(singular_values, dtype=float))
    if sv.size < 2:
        raise AmbiguousThreshold("need at least two singular values")
    floor = np.finfo(float).tiny
    ratios = np.maximum(sv[1:], floor) / np.maximum(sv[:-1], floor)
    i = int(np.argmax(ratios))
    if ratios[i] < gap_ratio:
        raise AmbiguousThreshold(f"largest singular-value ratio {ratios[i]:.3g} is below {gap_ratio:g}")
    threshold = math.sqrt(max(sv[i], floor) * sv[i + 1])
    return i + 1, threshold, float(sv[i + 1]), float(ratios[i])


def null_space_report(matrix: np.ndarray, candidates: np.ndarray | None = None, matrix_id: str = "",
                      gap_ratio: float = GAP_RATIO, params: dict | None = None) -> SpectralReport:
    matrix = np.asarray(matrix)
    _, sv, vt = np.linalg.svd(matrix)
    dim, thr, gap, ratio = count_kernel(sv, gap_ratio)
    asc = sv[::-1]
    rep = SpectralReport(matrix_id, dim, gap, thr, ratio, [float(x) for x in asc[:dim + 3]],
                         params=dict(params or {}))
    if candidates is not None:
        rep.kernel_residuals = [float(x) for x in kernel_residuals(matrix, candidates)]
        rep.solvability_products = [float(x) for x in
                                    np.linalg.norm(candidates.T @ matrix, axis=1)
                                    / (np.linalg.norm(candidates, axis=0) * sv[0])]
        null = vt[-dim:].T
        rep.max_principal_angle = float(np.max(subspace_angles(null, candidates)))
    return rep


def frequency_kernel_count(blocks: list[FrequencyBlock], gap_ratio: float = GAP_RATIO) -> int:
    pooled = np.concatenate([b.singular_values for b in blocks])
    dim, _, _, _ = count_kernel(pooled, gap_ratio)
    return dim


def gap_scaling_fit(ells, gaps) -> tuple[float, float]:
    """(C, tau) from least squares on log gap = log C - tau log ell."""
    A = np.column_stack([np.ones(len(ells)), -np.log(ells)])
    coef, *_ = np.linalg.lstsq(A, np.log(gaps), rcond=None)
    return float(math.exp(coef[0])), float(coef[1])


# ----------------------------------------------------------------------------
# full report

@dataclass
class NondegeneracyReport:
    passed: bool
    dim: int
    expected_total: int
    total_kernel_dim: int
    reports: dict
    sigmas: dict
    reasons: list
    params: dict

    def to_dict(self) -> dict:
        return {"passed": self.passed, "dim": self.dim, "expected_total": self.expected_total,
                "total_kernel_dim": self.total_kernel_dim,
                "reports": {k: v.to_dict() for k, v in self.reports.items()},
                "sigmas": self.sigmas, "reasons": self.reasons, "params": self.params}


def nondegeneracy_report(config: SpikeConfiguration, table: KernelTable, N: int | None = None,
                         gap_ratio: float = GAP_RATIO, sig: SigmaConstants | None = None,
                         exact: bool | None = None) -> NondegeneracyReport:
    """Kernel counts of M1 and H_alpha with their certified gaps.

    PASS iff each kernel count is 3 and each gap exceeds the kernel-vector
    residuals by at least ``gap_ratio``. H_alpha is the same matrix for every
    out-of-plane axis, so it is analysed once and counted N - 2 times.
    """
    N = config.dim if N is None else N
    if sig is None:
        sig = sigma_constants(table, config.ell, config.ell_bar, config.k, exact=exact)
    basis = build_symmetry_kernels(config)
    params = {"k": config.k, "m": config.m, "n": config.n, "ell": config.ell,
              "ell_bar": config.ell_bar, "dim": N}
    reports: dict[str, SpectralReport] = {}
    failures = []
    items = [("M1", assemble_M1(config, sig), basis.in_plane(), reduce_M1)]
    if N >= 3:
        items.append(("Halpha", assemble_H_alpha(config, sig), basis.out_of_plane(), reduce_H_alpha))
    for name, B, cand, reducer in items:
        try:
            reports[name] = matrix_report(B, cand, reducer, sig, gap_ratio, params)
        except AmbiguousThreshold as exc:
            failures.append(f"{name}: {exc}")
    return summarize(reports, N, sig.to_dict(), params, gap_ratio, failures)


def matrix_report(B, candidates: np.ndarray, reducer, sig: SigmaConstants, gap_ratio: float = GAP_RATIO,
                  params: dict | None = None) -> SpectralReport:
    """SVD report of one assembled matrix plus its per-frequency determinant table."""
    rep = null_space_report(B.dense(), candidates, B.which, gap_ratio, params)
    blocks, _ = frequency_blocks(reducer(B), sig.k)
    try:
        rep.frequency_kernel_count = frequency_kernel_count(blocks, gap_ratio)
    except AmbiguousThreshold:
        rep.frequency_kernel_count = None
    n = B.layout.n
    rep.det_table = compare_Dfj(sig, n, blocks) if B.which == "M1" else compare_Di(sig, B.layout.m, n, blocks)
    return rep


def summarize(reports: dict, N: int, sigmas: dict, params: dict, gap_ratio: float = GAP_RATIO,
              failures: list | None = None) -> NondegeneracyReport:
    """The only place PASS/FAIL is decided."""
    reasons = list(failures or [])
    for name, rep in reports.items():
        if rep.kernel_dim != 3:
            reasons.append(f"{name}: kernel dimension {rep.kernel_dim} != 3")
        if not rep.gap >= gap_ratio * rep.max_residual:
            reasons.append(f"{name}: gap {rep.gap:.3e} is not {gap_ratio:g} x residual {rep.max_residual:.3e}")
    total = 0
    if "M1" in reports:
        total += reports["M1"].kernel_dim
    if "Halpha" in reports:
        total += (N - 2) * reports["Halpha"].kernel_dim
    expected = 3 * N - 3
    if total != expected:
        reasons.append(f"total kernel dimension {total} != {expected}")
    return NondegeneracyReport(not reasons, N, expected, total, reports, sigmas, reasons, params)


@dataclass(frozen=True)
class SweepRow:
    ell_target: float
    m: int
    n: int
    ell: float
    gap_M1: float
    gap_Halpha: float
    passed: bool


def gap_sweep(table: KernelTable, k: int, ell_targets, dim: int = 3, max_m: int = 60,
              gap_ratio: float = GAP_RATIO) -> list[SweepRow]:
    """Balanced configuration closest to each target and its certified gaps."""
    rows = []
    for target in ell_targets:
        best = min(suggest_mn(k, target, table, max_m=max_m), key=lambda c: (abs(c.ell - target), c.spikes))
        bal = solve_balancing(table, k, best.m, best.n)
        cfg = build_configuration(k, best.m, best.n, bal.ell, bal.ell_bar, dim=dim)
        rep = nondegeneracy_report(cfg, table, dim, gap_ratio)
        gaps = {name: r.gap for name, r in rep.reports.items()}
        rows.append(SweepRow(float(target), best.m, best.n, bal.ell, gaps.get("M1", float("nan")),
                             gaps.get("Halpha", float("nan")), rep.passed))
    return rows
