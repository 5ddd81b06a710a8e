"""Interaction kernels between two separated copies of the ground state.

For a separation s along a unit vector e:

    psi(s)   = -int w(x - s e) div(w^p(x) e) dx
    psi1(s)  =  int div(w^p(x) e) div(w(x - s e) e) dx
    psi2(s)  =  int div(w^p(x) f) div(w(x - s e) f) dx,   f orthogonal to e

with div(w^p(x) u) = p w^{p-1} w'(|x|) (u . x)/|x|. Two quadratures are
provided. The axial route uses the symmetry about the e axis and integrates
in (t, rho) = (x . e, |x - (x . e) e|). The lab route integrates in a fixed
Cartesian frame (x1, x2, |x_rest|) and does not know e in advance; it is the
independent check used for e-independence and for the projection identity.

psi1 carries its literal sign (negative for separated spikes); positivity
and decay statements elsewhere are made about |psi1|.
"""

from __future__ import annotations

import csv
import math
import weakref
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import gamma

from .errors import InvalidParams, OutOfRange, QuadratureFailure
from .io import ensure_parent
from .ground_state import RadialProfile, profile_pair

# the workqueue layer is always available and keeps row order deterministic
numba.config.THREADING_LAYER = "workqueue"

KERNEL_NAMES = ("psi", "psi1", "psi2")


@dataclass(frozen=True)
class QuadratureOptions:
    order: int = 8
    check_order: int = 12
    fine_width: float = 0.25
    coarse_width: float = 1.0
    halo: float = 4.0
    quad_tol: float = 1e-9
    lab_half_width: float | None = None  # default 24/(p-1) + 2, capped at r_max


@dataclass(frozen=True)
class KernelValues:
    s: float
    psi: float
    psi1: float
    psi2: float
    rel_err: float

    def as_tuple(self):
        return self.psi, self.psi1, self.psi2


# ----------------------------------------------------------------------------
# panel construction

def graded_edges(a: float, b: float, centers, fine: float, halo: float, coarse: float) -> np.ndarray:
    """Panel edges of width ``coarse`` refined to ``fine`` within ``halo`` of each center."""
    pts = set(np.round(np.arange(a, b + 1e-12, coarse), 12).tolist())
    pts.add(round(b, 12))
    for c in centers:
        for x in np.arange(c - halo, c + halo + 1e-12, fine):
            if a <= x <= b:
                pts.add(round(float(x), 12))
    edges = np.array(sorted(pts))
    return edges[np.concatenate(([True], np.diff(edges) > 1e-9))]


@lru_cache(maxsize=None)
def _legendre(q: int):
    return np.polynomial.legendre.leggauss(q)


def panel_rule(edges: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    x, wt = _legendre(q)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    half = (hi - lo) / 2
    return (half * x + (hi + lo) / 2).ravel(), (half * wt).ravel()


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^d in R^{d+1}; S^0 counts two points."""
    return 2.0 * math.pi ** ((d + 1) / 2) / gamma((d + 1) / 2)


# ----------------------------------------------------------------------------
# compiled integrands

@numba.njit(parallel=True, cache=True)
def _axial_sums(s, N, p, rcut, t, wt, rho, wr, h, vals, ders, curv, rmax, amp, half):
    nt = t.size
    rows = np.zeros((nt, 3))
    for a in numba.prange(nt):
        ta = t[a]
        acc0 = 0.0
        acc1 = 0.0
        acc2 = 0.0
        for b in range(rho.size):
            rb = rho[b]
            r1 = math.hypot(ta, rb)
            if r1 > rcut:
                continue
            r2 = math.hypot(ta - s, rb)
            w1, d1 = profile_pair(r1, h, vals, ders, curv, rmax, amp, half)
            w2, d2 = profile_pair(r2, h, vals, ders, curv, rmax, amp, half)
            base = p * w1 ** (p - 1.0) * d1 / r1
            q2 = d2 / r2
            wgt = wr[b] * rb ** (N - 2)
            acc0 += wgt * w2 * base * ta
            acc1 += wgt * base * ta * q2 * (ta - s)
            acc2 += wgt * base * q2 * rb * rb
        rows[a, 0] = wt[a] * acc0
        rows[a, 1] = wt[a] * acc1
        rows[a, 2] = wt[a] * acc2
    return rows


@numba.njit(parallel=True, cache=True)
def _lab_sums(ex, ey, s, N, p, x, wx, v, wv, h, vals, ders, curv, rmax, amp, half):
    # columns: g_x, g_y, G_xx, G_xy, G_yx, G_yy, G_perp
    nx = x.size
    rows = np.zeros((nx, 7))
    cx = s * ex
    cy = s * ey
    for a in numba.prange(nx):
        xa = x[a]
        acc = np.zeros(7)
        for b in range(nx):
            xb = x[b]
            for c in range(v.size):
                vc = v[c]
                r1 = math.sqrt(xa * xa + xb * xb + vc * vc)
                ux = xa - cx
                uy = xb - cy
                r2 = math.sqrt(ux * ux + uy * uy + vc * vc)
                w1, d1 = profile_pair(r1, h, vals, ders, curv, rmax, amp, half)
                w2, d2 = profile_pair(r2, h, vals, ders, curv, rmax, amp, half)
                base = p * w1 ** (p - 1.0) * d1 / r1
                q2 = d2 / r2
                wgt = wx[b] * wv[c] * (vc ** (N - 3) if N > 2 else 1.0)
                acc[0] += wgt * w2 * base * xa
                acc[1] += wgt * w2 * base * xb
                acc[2] += wgt * base * q2 * xa * ux
                acc[3] += wgt * base * q2 * xa * uy
                acc[4] += wgt * base * q2 * xb * ux
                acc[5] += wgt * base * q2 * xb * uy
                acc[6] += wgt * base * q2 * vc * vc
        for j in range(7):
            rows[a, j] = wx[a] * acc[j]
    return rows


# ----------------------------------------------------------------------------
# evaluator bound to one profile

@dataclass(frozen=True)
class LabMoments:
    """Lab-frame moments at separation s along e (in the x1-x2 plane).

    ``g`` gives psi = -e . g; ``G`` gives the projection a . G . b for in-plane
    a, b; ``G_perp`` is the same integral for a = b pointing out of the plane.
    """

    s: float
    e: np.ndarray
    g: np.ndarray
    G: np.ndarray
    G_perp: float
    rel_err: float


class KernelEvaluator:
    """Direct quadrature of the kernels for one profile, with memoization."""

    def __init__(self, profile: RadialProfile, opts: QuadratureOptions | None = None):
        if profile.params.dim < 2:
            raise InvalidParams("interaction kernels need dim >= 2")
        self.profile = profile
        self.opts = opts or QuadratureOptions()
        self.N = profile.params.dim
        self.p = profile.params.exponent
        self._arrays = profile.arrays()
        self._cache: dict[float, KernelValues] = {}
        self._lab_cache: dict[tuple, LabMoments] = {}

    @property
    def cutoff(self) -> float:
        # beyond this radius around the weighted spike the integrands are
        # below e^{-36} relative to the kernel value
        return min(self.profile.r_max, 36.0 / (self.p - 1.0) + 4.0)

    @property
    def profile_digest(self) -> str:
        return self.profile.digest()

    def _axial(self, s: float, q: int) -> np.ndarray:
        o = self.opts
        L = self.profile.r_max
        t, wt = panel_rule(graded_edges(-L, s + L, (0.0, s), o.fine_width, o.halo, o.coarse_width), q)
        rho, wr = panel_rule(graded_edges(0.0, L, (0.0,), o.fine_width, o.halo, o.coarse_width), q)
        rows = _axial_sums(float(s), self.N, self.p, self.cutoff, t, wt, rho, wr, *self._arrays)
        sums = rows.sum(axis=0)
        area = sphere_area(self.N - 2)
        return np.array([-area * sums[0], area * sums[1], area * sums[2] / (self.N - 1)])

    def values(self, s: float) -> KernelValues:
        s = float(s)
        if s < 2.0:
            raise OutOfRange(f"separation {s} is below the well-separated regime s >= 2")
        hit = self._cache.get(s)
        if hit is not None:
            return hit
        fine = self._axial(s, self.opts.check_order)
        coarse = self._axial(s, self.opts.order)
        err = float(np.max(np.abs(fine - coarse) / np.abs(fine)))
        if not np.all(np.isfinite(fine)) or err > self.opts.quad_tol:
            raise QuadratureFailure(f"kernel quadrature at s={s}: estimated error {err:.2e}")
        out = KernelValues(s, float(fine[0]), float(fine[1]), float(fine[2]), err)
        self._cache[s] = out
        return out

    def _lab(self, s: float, e: np.ndarray, q: int) -> np.ndarray:
        o = self.opts
        B = o.lab_half_width
        if B is None:
            B = 24.0 / (self.p - 1.0) + 2.0
        B = min(B, self.profile.r_max)
        x, wx = panel_rule(graded_edges(-B, B, (0.0,), o.fine_width, o.halo, o.coarse_width), q)
        if self.N > 2:
            v, wv = panel_rule(graded_edges(0.0, B, (0.0,), o.fine_width, o.halo, o.coarse_width), q)
            area = sphere_area(self.N - 3)
        else:
            v, wv = np.zeros(1), np.ones(1)
            area = 1.0
        rows = _lab_sums(float(e[0]), float(e[1]), float(s), self.N, self.p, x, wx, v, wv, *self._arrays)
        sums = area * rows.sum(axis=0)
        if self.N > 2:
            sums[6] /= self.N - 2
        return sums

    def lab_moments(self, s: float, e) -> LabMoments:
        e = np.asarray(e, dtype=float)[:2]
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError("direction e must be a unit vector in the x1-x2 plane")
        # directions computed from different point pairs agree only to rounding
        key = (round(float(s), 12), round(float(e[0]), 12), round(float(e[1]), 12))
        hit = self._lab_cache.get(key)
        if hit is not None:
            return hit
        fine = self._lab(s, e, self.opts.order)
        coarse = self._lab(s, e, self.opts.order - 2)
        scale = max(np.max(np.abs(fine[:2])), 1e-300)
        gscale = max(np.max(np.abs(fine[2:])), 1e-300)
        err = max(np.max(np.abs(fine[:2] - coarse[:2])) / scale,
                  np.max(np.abs(fine[2:] - coarse[2:])) / gscale)
        if not np.all(np.isfinite(fine)) or err > self.opts.quad_tol:
            raise QuadratureFailure(f"lab-frame quadrature at s={s}: estimated error {err:.2e}")
        if self.N == 2:
            fine[6] = np.nan
        out = LabMoments(float(s), e.copy(), fine[:2].copy(), fine[2:6].reshape(2, 2).copy(),
                         float(fine[6]), float(err))
        self._lab_cache[key] = out
        return out


_EVALUATORS: "weakref.WeakKeyDictionary[RadialProfile, KernelEvaluator]" = weakref.WeakKeyDictionary()


def evaluator_for(profile: RadialProfile, opts: QuadratureOptions | None = None) -> KernelEvaluator:
    if opts is not None:
        return KernelEvaluator(profile, opts)
    ev = _EVALUATORS.get(profile)
    if ev is None:
        ev = KernelEvaluator(profile)
        _EVALUATORS[profile] = ev
    return ev


def psi(profile: RadialProfile, s: float, e=None, opts: QuadratureOptions | None = None) -> float:
    """psi(s). With ``e`` given the lab-frame quadrature is used, otherwise the axial one."""
    ev = evaluator_for(profile, opts)
    if e is None:
        return ev.values(s).psi
    m = ev.lab_moments(s, e)
    return float(-(m.e @ m.g))


def psi1(profile: RadialProfile, ell: float, opts: QuadratureOptions | None = None) -> float:
    return evaluator_for(profile, opts).values(ell).psi1


def psi2(profile: RadialProfile, ell: float, opts: QuadratureOptions | None = None) -> float:
    return evaluator_for(profile, opts).values(ell).psi2


def kernel_values(profile: RadialProfile, s: float, opts: QuadratureOptions | None = None) -> KernelValues:
    return evaluator_for(profile, opts).values(s)


def interaction_tensor(profile: RadialProfile, ell: float, e, opts: QuadratureOptions | None = None) -> LabMoments:
    return evaluator_for(profile, opts).lab_moments(ell, e)


def interaction_projection(profile: RadialProfile, a, b, ell: float, e,
                           opts: QuadratureOptions | None = None) -> float:
    """int p w^{p-1}(x) (a . grad w(x)) (b . grad w(x - ell e)) dx for in-plane a, b, e."""
    a = np.asarray(a, dtype=float)[:2]
    b = np.asarray(b, dtype=float)[:2]
    m = interaction_tensor(profile, ell, e, opts)
    return float(a @ m.G @ b)


def projection_decomposition(k1: float, k2: float, a, b, e) -> float:
    """(a.e)(b.e) k1 + (a.f)(b.f) k2 with f = e rotated by +90 degrees."""
    a = np.asarray(a, dtype=float)[:2]
    b = np.asarray(b, dtype=float)[:2]
    e = np.asarray(e, dtype=float)[:2]
    f = np.array([-e[1], e[0]])
    return float((a @ e) * (b @ e) * k1 + (a @ f) * (b @ f) * k2)


# ----------------------------------------------------------------------------
# tabulation

def _log_exponents(N: int) -> np.ndarray:
    # exponents c in |X| ~ C e^{-s} s^{-c}
    return np.array([(N - 1) / 2, (N - 1) / 2, (N + 1) / 2])


@dataclass(eq=False)
class KernelTable:
    """Tabulated kernels on log-spaced nodes with spline interpolation.

    The spline acts on log|X(s)| + s + c log s, which is slowly varying.
    A table built from (or attached to) a profile also answers exact queries
    by direct quadrature.
    """

    dim: int
    exponent: float
    s: np.ndarray
    psi: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    profile_ref: str
    quad_tol: float = 1e-9
    evaluator: KernelEvaluator | None = field(default=None, repr=False)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        for name in KERNEL_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.s.ndim != 1 or self.s.size < 4 or np.any(np.diff(self.s) <= 0):
            raise ValueError("table nodes must be an increasing sequence of at least 4 points")
        c = _log_exponents(self.dim)
        self._splines = []
        for j, name in enumerate(KERNEL_NAMES):
            vals = getattr(self, name)
            if np.any(vals == 0):
                raise ValueError(f"{name} vanishes on the table")
            g = np.log(np.abs(vals)) + self.s + c[j] * np.log(self.s)
            self._splines.append((CubicSpline(self.s, g), float(np.sign(vals[0])), c[j]))

    @property
    def s_range(self) -> tuple[float, float]:
        return float(self.s[0]), float(self.s[-1])

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.s_range
        if np.any(s < lo - 1e-12) or np.any(s > hi + 1e-12):
            raise OutOfRange(f"separation outside the tabulated range [{lo}, {hi}]")
        return s

    def interpolate(self, name: str, s, deriv: int = 0):
        s = self._check(s)
        spl, sign, c = self._splines[KERNEL_NAMES.index(name)]
        g = spl(s)
        val = sign * np.exp(g - s - c * np.log(s))
        if deriv == 0:
            return val
        if deriv == 1:
            return val * (spl(s, 1) - 1.0 - c / s)
        raise ValueError("only the value and first derivative are interpolated")

    def value(self, name: str, s: float, exact: bool | None = None) -> float:
        """One kernel at s; ``exact`` forces (True) or forbids (False) direct quadrature."""
        use_direct = self.evaluator is not None if exact is None else exact
        if use_direct:
            if self.evaluator is None:
                raise ValueError("no profile attached for direct quadrature")
            self._check(s)
            return getattr(self.evaluator.values(s), name)
        return float(self.interpolate(name, s))

    def attach(self, profile: RadialProfile, opts: QuadratureOptions | None = None) -> "KernelTable":
        if profile.digest() != self.profile_ref:
            raise ValueError("profile does not match the one used to build this table")
        self.evaluator = evaluator_for(profile, opts)
        return self

    # invariants ---------------------------------------------------------------
    def invariant_report(self) -> dict:
        mags = {name: np.abs(getattr(self, name)) for name in KERNEL_NAMES}
        ratio = mags["psi2"] / mags["psi1"]
        return {
            "positive": bool(np.all(self.psi > 0) and np.all(self.psi2 > 0) and np.all(self.psi1 < 0)),
            "decreasing": {n: bool(np.all(np.diff(mags[n]) < 0)) for n in KERNEL_NAMES},
            "transverse_ratio_decreasing": bool(np.all(np.diff(ratio) < 0)),
            "ratio_times_s_range": [float(np.min(ratio * self.s)), float(np.max(ratio * self.s))],
            # the one-divergence and two-divergence kernels differ by this factor
            "psi1_over_psi_range": [float(np.min(self.psi1 / self.psi)), float(np.max(self.psi1 / self.psi))],
        }

    # serialization -------------------------------------------------------------
    def to_csv(self, path) -> None:
        ensure_parent(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["s", *KERNEL_NAMES])
            for row in zip(self.s, self.psi, self.psi1, self.psi2):
                wr.writerow([repr(float(x)) for x in row])

    def metadata(self) -> dict:
        return {"dim": self.dim, "exponent": self.exponent, "profile_ref": self.profile_ref,
                "quad_tol": self.quad_tol, "nodes": int(self.s.size)}

    @classmethod
    def from_csv(cls, path, meta: dict) -> "KernelTable":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != ["s", *KERNEL_NAMES]:
            raise ValueError(f"unexpected kernel CSV header {rows[0]}")
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        return cls(int(meta["dim"]), float(meta["exponent"]), data[:, 0], data[:, 1], data[:, 2],
                   data[:, 3], meta["profile_ref"], float(meta.get("quad_tol", 1e-9)))


def table_nodes(smin: float, smax: float, max_spacing: float = 0.25) -> np.ndarray:
    if not (2.0 <= smin < smax):
        raise OutOfRange("table range must satisfy 2 <= smin < smax")
    ratio = smax / smin
    # log spacing: the widest gap is the last one, smax (1 - ratio^{-1/(n-1)})
    n = 2
    while smax * (1 - ratio ** (-1.0 / (n - 1))) > max_spacing:
        n += 1
    return smin * ratio ** (np.arange(n) / (n - 1))


def tabulate_kernels(profile: RadialProfile, smin: float = 6.0, smax: float = 24.0,
                     max_spacing: float = 0.25, opts: QuadratureOptions | None = None) -> KernelTable:
    ev = evaluator_for(profile, opts)
    nodes = table_nodes(smin, smax, max_spacing)
    vals = np.array([ev.values(s).as_tuple() for s in nodes])
    table = KernelTable(profile.params.dim, profile.params.exponent, nodes, vals[:, 0], vals[:, 1],
                        vals[:, 2], profile.digest(), ev.opts.quad_tol)
    table.evaluator = ev
    return table


# ----------------------------------------------------------------------------
# derived constants

@dataclass(frozen=True)
class SigmaConstants:
    delta2: float
    sigma1: float
    sigma2: float
    sigma3: float
    ell: float
    ell_bar: float
    k: int
    sigma3_fd: float = float("nan")
    sigma3_fd_rel_diff: float = float("nan")
    diagnostic: bool = False

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


def sigma_constants(table: KernelTable, ell: float, ell_bar: float, k: int,
                    diagnostic: bool = False, exact: bool | None = None,
                    fd_step: float = 1e-3) -> SigmaConstants:
    """Ratios of kernel values at the two spacings.

    Also reports (d ell_bar / d ell)^{-1}, obtained by finite differences of
    the force balance psi(ell) = 2 sin(pi/k) psi(ell_bar) solved for ell_bar.
    """
    if k < 7 and not diagnostic:
        raise OutOfRange("k must be at least 7 (smaller k only in diagnostic mode)")
    lo, hi = table.s_range
    for x in (ell, ell_bar):
        if not lo <= x <= hi:
            raise OutOfRange(f"{x} outside the tabulated range [{lo}, {hi}]")
    sn = math.sin(math.pi / k)
    v = {name: (table.value(name, ell, exact), table.value(name, ell_bar, exact)) for name in KERNEL_NAMES}
    p1, p1b = v["psi1"]
    p2, p2b = v["psi2"]
    delta2 = 2 * sn * p2b / p2
    sigma1 = ell * p2 / p1
    sigma2 = ell * p2b / p1b
    sigma3 = 2 * sn * p1b / p1

    fd = float("nan")
    rel = float("nan")
    if lo + fd_step <= ell - fd_step and ell + fd_step <= hi:
        def partner(x):
            target = math.log(table.interpolate("psi", x)) - math.log(2 * sn)
            f = lambda y: math.log(table.interpolate("psi", y)) - target
            a, b = max(lo, ell_bar - 2.0), min(hi, ell_bar + 2.0)
            if f(a) * f(b) > 0:
                return float("nan")
            return brentq(f, a, b, xtol=1e-14, rtol=1e-15)

        slope = (partner(ell + fd_step) - partner(ell - fd_step)) / (2 * fd_step)
        fd = 1.0 / slope
        rel = abs(sigma3 - fd) / abs(fd)
    return SigmaConstants(float(delta2), float(sigma1), float(sigma2), float(sigma3), float(ell),
                          float(ell_bar), int(k), float(fd), float(rel), bool(diagnostic))
