"""Shared, memoized builders for the slow artifacts (profiles, tables, configurations)."""

from __future__ import annotations

import math
from functools import cache

import numpy as np

from spike_spectra import (
    ProblemParams,
    build_configuration,
    sigma_constants,
    solve_balancing,
    solve_ground_state,
    tabulate_kernels,
)


def soliton(r, p):
    """Closed-form one-dimensional ground state."""
    r = np.asarray(r, dtype=float)
    return ((p + 1) / 2) ** (1 / (p - 1)) / np.cosh((p - 1) * r / 2) ** (2 / (p - 1))


@cache
def profile(dim: int, p: float = 3.0):
    return solve_ground_state(ProblemParams(dim, p))


@cache
def table(dim: int, p: float = 3.0, smin: float = 6.0, smax: float = 24.0):
    return tabulate_kernels(profile(dim, p), smin, smax)


@cache
def balanced(k: int, m: int, n: int, dim: int = 3, p: float = 3.0):
    """(config, sigmas, balance) for a balanced (k, m, n)."""
    tab = table(dim, p)
    bal = solve_balancing(tab, k, m, n)
    cfg = build_configuration(k, m, n, bal.ell, bal.ell_bar, dim=dim)
    sig = sigma_constants(tab, bal.ell, bal.ell_bar, k)
    return cfg, sig, bal


def detuned(k: int, m: int, n: int, factor: float, dim: int = 3):
    """Geometry closed at ell_bar * factor, so only the force balance is broken."""
    from spike_spectra.configuration import ratio_of_spacings

    _, _, bal = balanced(k, m, n, dim)
    lb = bal.ell_bar * factor
    return build_configuration(k, m, n, ratio_of_spacings(k, m, n) * lb, lb, dim=dim)


def rel(a, b) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a)


def unit(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])
