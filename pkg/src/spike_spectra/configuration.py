"""k-fold symmetric spike configurations and their balancing.

Each of the k sectors i holds an inner segment of m+1 equally spaced spikes
(spacing ell) running radially from the vertex y_1 of the inner polygon to
the vertex y_{m+1} of the outer polygon, followed by 2n-1 interior points on
the outer edge towards the next vertex (spacing ell_bar, alternating signs).

Points are stored in the canonical order used for matrix assembly: the ring
of y_1 vertices, the ring of y_{m+1} vertices, then the inner-segment
interiors (j = 2..m) sector by sector, then the outer-edge interiors
(j = m+2..m+2n) sector by sector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .errors import ConstraintViolation, EmptyResult, InvalidParams, NoRoot, OutOfRange

LINEAR_TOL = 1e-8


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Layout:
    """Offsets of the four index families inside one component vector."""

    k: int
    m: int
    n: int

    @property
    def inner(self) -> int:
        return self.m - 1

    @property
    def outer(self) -> int:
        return 2 * self.n - 1

    @property
    def size(self) -> int:
        return self.k * (self.m + 2 * self.n)

    def ring1(self, i: int) -> int:
        return i % self.k

    def ring2(self, i: int) -> int:
        return self.k + i % self.k

    def y1(self, i: int, j: int) -> int:
        """Inner-segment interior point j (2 <= j <= m) of sector i."""
        return 2 * self.k + (i % self.k) * self.inner + (j - 2)

    def y2(self, i: int, j: int) -> int:
        """Outer-edge interior point j (m+2 <= j <= m+2n) of sector i."""
        return 2 * self.k + self.k * self.inner + (i % self.k) * self.outer + (j - self.m - 2)

    def index(self, i: int, j: int) -> int:
        if j == 1:
            return self.ring1(i)
        if j == self.m + 1:
            return self.ring2(i)
        if 2 <= j <= self.m:
            return self.y1(i, j)
        if self.m + 2 <= j <= self.m + 2 * self.n:
            return self.y2(i, j)
        raise IndexError(f"label j={j} outside 1..{self.m + 2 * self.n}")

    def labels(self) -> list[tuple[int, int]]:
        out = [(i, 1) for i in range(self.k)] + [(i, self.m + 1) for i in range(self.k)]
        out += [(i, j) for i in range(self.k) for j in range(2, self.m + 1)]
        out += [(i, j) for i in range(self.k) for j in range(self.m + 2, self.m + 2 * self.n + 1)]
        return out

    def block_slices(self) -> dict[str, slice]:
        k, a, b = self.k, self.inner, self.outer
        return {"ring1": slice(0, k), "ring2": slice(k, 2 * k),
                "Y1": slice(2 * k, 2 * k + k * a), "Y2": slice(2 * k + k * a, 2 * k + k * (a + b))}


@dataclass(frozen=True, eq=False)
class SpikeConfiguration:
    k: int
    m: int
    n: int
    ell: float
    ell_bar: float
    dim: int
    centers: np.ndarray = field(repr=False)   # (count, 2), canonical order
    signs: np.ndarray = field(repr=False)
    labels: tuple = field(repr=False)
    dir1: np.ndarray = field(repr=False)      # first local frame vector per point
    dir2: np.ndarray = field(repr=False)      # second local frame vector per point

    @property
    def layout(self) -> Layout:
        return Layout(self.k, self.m, self.n)

    @property
    def count(self) -> int:
        return self.centers.shape[0]

    @property
    def sin_k(self) -> float:
        return math.sin(math.pi / self.k)

    def frames(self, i: int) -> dict[str, np.ndarray]:
        th = 2 * math.pi * i / self.k
        ph = th + math.pi / self.k
        return {"radial": np.array([math.cos(th), math.sin(th)]),
                "radial_perp": np.array([math.sin(th), -math.cos(th)]),
                "tangent": np.array([-math.sin(ph), math.cos(ph)]),
                "normal": np.array([math.cos(ph), math.sin(ph)])}

    def padded_centers(self) -> np.ndarray:
        out = np.zeros((self.count, max(self.dim, 2)))
        out[:, :2] = self.centers
        return out

    # geometric residuals --------------------------------------------------------
    def linear_residual(self) -> float:
        return abs(2 * self.sin_k * self.m * self.ell - (2 * self.n - 1) * self.ell_bar)

    def closure_residual(self) -> float:
        L = self.layout
        ym = self.centers[L.ring2(0)]
        t = self.frames(0)["tangent"]
        return float(np.linalg.norm(_rot(2 * math.pi / self.k) @ ym - ym - 2 * self.n * self.ell_bar * t))

    def neighbor_pairs(self) -> list[tuple[int, int, str]]:
        """The chain neighbor graph: (a, b, kind) with kind 'inner', 'outer' or 'ring'."""
        L = self.layout
        k, m, n = self.k, self.m, self.n
        pairs = []
        for i in range(k):
            pairs.append((L.ring1(i), L.ring1(i + 1), "ring"))
            for j in range(1, m + 1):
                pairs.append((L.index(i, j), L.index(i, j + 1), "inner"))
            for j in range(m + 1, m + 2 * n):
                pairs.append((L.index(i, j), L.index(i, j + 1), "outer"))
            pairs.append((L.index(i, m + 2 * n), L.ring2(i + 1), "outer"))
        return pairs

    def spacing_errors(self) -> dict[str, float]:
        out = {"inner": 0.0, "outer": 0.0, "ring": 0.0}
        target = {"inner": self.ell, "outer": self.ell_bar, "ring": self.ell_bar}
        for a, b, kind in self.neighbor_pairs():
            d = np.linalg.norm(self.centers[a] - self.centers[b])
            out[kind] = max(out[kind], abs(d - target[kind]) / target[kind])
        return out

    def residuals(self) -> dict[str, float]:
        return {"linear": self.linear_residual(), "closure": self.closure_residual(),
                **{f"spacing_{k}": v for k, v in self.spacing_errors().items()}}

    # serialization ----------------------------------------------------------------
    def to_dict(self) -> dict:
        pts = [{"i": int(i), "j": int(j), "center": [float(x) for x in c], "sign": int(s)}
               for (i, j), c, s in zip(self.labels, self.padded_centers(), self.signs)]
        frames = [{key: [float(x) for x in v] for key, v in self.frames(i).items()} for i in range(self.k)]
        return {"k": self.k, "m": self.m, "n": self.n, "ell": self.ell, "ell_bar": self.ell_bar,
                "dim": self.dim, "points": pts, "frames": frames, "residuals": self.residuals()}

    @classmethod
    def from_dict(cls, data: dict, strict: bool = True) -> "SpikeConfiguration":
        return build_configuration(int(data["k"]), int(data["m"]), int(data["n"]), float(data["ell"]),
                                   float(data["ell_bar"]), dim=int(data.get("dim", 2)), strict=strict)


def build_configuration(k: int, m: int, n: int, ell: float, ell_bar: float, dim: int = 2,
                        strict: bool = True, allow_small_k: bool = False) -> SpikeConfiguration:
    if k < 7 and not allow_small_k:
        raise InvalidParams(f"k = {k}: at least 7 sectors are required")
    if m < 1 or n < 1:
        raise InvalidParams("m and n must be positive")
    if not (ell > 0 and ell_bar > 0):
        raise InvalidParams("spacings must be positive")
    sn, cs = math.sin(math.pi / k), math.cos(math.pi / k)
    lin = abs(2 * sn * m * ell - (2 * n - 1) * ell_bar)
    if strict and lin > LINEAR_TOL * ell:
        raise ConstraintViolation(f"linear balancing residual {lin:.3e} exceeds {LINEAR_TOL:g} * ell")

    y1 = np.array([ell_bar / (2 * sn), 0.0])
    t = np.array([-sn, cs])
    base = [(j, y1 + (j - 1) * ell * np.array([1.0, 0.0]), 1) for j in range(1, m + 2)]
    ym = base[-1][1]
    base += [(j, ym + (j - m - 1) * ell_bar * t, (-1) ** (j - m - 1)) for j in range(m + 2, m + 2 * n + 1)]
    by_j = {j: (y, s) for j, y, s in base}

    layout = Layout(k, m, n)
    labels = tuple(layout.labels())
    centers = np.empty((len(labels), 2))
    signs = np.empty(len(labels), dtype=int)
    d1 = np.empty((len(labels), 2))
    d2 = np.empty((len(labels), 2))
    for a, (i, j) in enumerate(labels):
        th = 2 * math.pi * i / k
        y, s = by_j[j]
        centers[a] = _rot(th) @ y
        signs[a] = s
        if j <= m + 1:
            d1[a] = (math.cos(th), math.sin(th))
            d2[a] = (math.sin(th), -math.cos(th))
        else:
            ph = th + math.pi / k
            d1[a] = (-math.sin(ph), math.cos(ph))
            d2[a] = (math.cos(ph), math.sin(ph))
    for arr in (centers, signs, d1, d2):
        arr.setflags(write=False)
    return SpikeConfiguration(k, m, n, float(ell), float(ell_bar), int(dim), centers, signs, labels, d1, d2)


# ----------------------------------------------------------------------------
# balancing

@dataclass(frozen=True)
class BalanceResult:
    ell: float
    ell_bar: float
    mode: str
    force_residual: float      # |psi(ell) - 2 sin(pi/k) psi(ell_bar)| / psi(ell)
    linear_residual: float     # |2 sin(pi/k) m ell - (2n-1) ell_bar| / ell
    polished: bool = False

    def __iter__(self):
        return iter((self.ell, self.ell_bar))


def ratio_of_spacings(k: int, m: int, n: int) -> float:
    """ell / ell_bar forced by the linear relation."""
    return (2 * n - 1) / (2 * math.sin(math.pi / k) * m)


def asymptotic_ell_bar(k: int, m: int, n: int) -> float:
    rho = ratio_of_spacings(k, m, n)
    if rho <= 1:
        raise NoRoot(f"(m, n) = ({m}, {n}) gives ell <= ell_bar; no separated balance exists")
    return -math.log(2 * math.sin(math.pi / k)) / (rho - 1)


def solve_balancing(table, k: int, m: int, n: int, mode: str = "numeric",
                    polish: bool = True, max_newton: int = 8) -> BalanceResult:
    """Solve psi(ell) = 2 sin(pi/k) psi(ell_bar) together with the linear relation.

    ``numeric`` bisects on ell_bar with the table interpolant (ell eliminated by
    the linear relation) and, when the table has a profile attached, polishes
    with Newton steps on direct quadrature. ``asymptotic`` closes the system
    with ell_bar = ell + ln(2 sin(pi/k)) instead.
    """
    if k < 7:
        raise InvalidParams(f"k = {k}: at least 7 sectors are required")
    sn = math.sin(math.pi / k)
    rho = ratio_of_spacings(k, m, n)
    if rho <= 1:
        raise NoRoot(f"(m, n) = ({m}, {n}) gives ell <= ell_bar; no separated balance exists")

    def force(lb, exact=False):
        if exact:
            return table.value("psi", rho * lb, True), table.value("psi", lb, True)
        return float(table.interpolate("psi", rho * lb)), float(table.interpolate("psi", lb))

    def rel_force(lb, exact):
        if table is None:
            return float("nan")
        lo, hi = table.s_range
        if not (lo <= lb and rho * lb <= hi):
            return float("nan")
        a, b = force(lb, exact)
        return abs(a - 2 * sn * b) / a

    if mode == "asymptotic":
        lb = asymptotic_ell_bar(k, m, n)
        l = rho * lb
        exact = table is not None and table.evaluator is not None
        return BalanceResult(l, lb, mode, rel_force(lb, exact),
                             abs(2 * sn * m * l - (2 * n - 1) * lb) / l)
    if mode != "numeric":
        raise ValueError(f"unknown balancing mode {mode!r}")
    if table is None:
        raise ValueError("numeric balancing needs a kernel table")

    lo, hi = table.s_range
    a, b = lo, hi / rho
    if a >= b:
        raise OutOfRange("kernel table too short to hold both spacings")

    def F(lb):
        x, y = force(lb)
        return math.log(x) - math.log(2 * sn) - math.log(y)

    fa, fb = F(a), F(b)
    if fa * fb > 0:
        raise NoRoot(f"balance function does not change sign on [{a:.3f}, {b:.3f}]")
    lb = bisect(F, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)

    polished = False
    if polish and table.evaluator is not None:
        ev = table.evaluator
        for _ in range(max_newton):
            v, vb = ev.values(rho * lb), ev.values(lb)
            g = math.log(v.psi) - math.log(2 * sn) - math.log(vb.psi)
            dg = rho * v.psi1 / v.psi - vb.psi1 / vb.psi
            step = g / dg
            lb -= step
            if abs(step) < 1e-13 * lb:
                break
        polished = True
    if not (lo <= lb and rho * lb <= hi):
        raise OutOfRange("balanced spacings leave the tabulated range")
    l = rho * lb
    return BalanceResult(l, lb, mode, rel_force(lb, polished),
                         abs(2 * sn * m * l - (2 * n - 1) * lb) / l, polished)


@dataclass(frozen=True)
class MNCandidate:
    m: int
    n: int
    ell: float
    ell_bar: float
    spikes: int
    numeric: bool


def suggest_mn(k: int, ell_target: float, table=None, rel_window: float = 0.1,
               max_m: int | None = None, limit: int | None = None) -> list[MNCandidate]:
    """(m, n) pairs whose balanced ell lies within ``rel_window`` of the target.

    The search covers m <= max_m, by default 8 * ell_target so that the window
    grows with ell. With a table the balanced ell is the numeric root,
    otherwise the asymptotic one. Ranked by |ell - ell_target|, then size.
    """
    if ell_target < 8:
        raise OutOfRange("ell_target must be at least 8")
    if k < 7:
        raise InvalidParams(f"k = {k}: at least 7 sectors are required")
    sn = math.sin(math.pi / k)
    if max_m is None:
        max_m = int(8 * ell_target)
    found = []
    for m in range(2, max_m + 1):
        # ell_asym(n) decreases with n once rho > 1; scan the n near rho ~ 1
        n0 = max(1, int(math.floor(sn * m + 0.5)))
        for n in range(n0, n0 + int(2 * sn * m) + 3):
            rho = (2 * n - 1) / (2 * sn * m)
            if rho <= 1:
                continue
            lb = -math.log(2 * sn) / (rho - 1)
            l = rho * lb
            if l < ell_target * (1 - 2.5 * rel_window):
                break
            if abs(l - ell_target) > 2.5 * rel_window * ell_target:
                continue
            numeric = False
            if table is not None:
                try:
                    res = solve_balancing(table, k, m, n, polish=False)
                    l, lb, numeric = res.ell, res.ell_bar, True
                except (NoRoot, OutOfRange):
                    continue
            if abs(l - ell_target) <= rel_window * ell_target:
                found.append(MNCandidate(m, n, l, lb, k * (m + 2 * n), numeric))
    if not found:
        raise EmptyResult(f"no (m, n) with m <= {max_m} balances near ell = {ell_target}")
    found.sort(key=lambda c: (abs(c.ell - ell_target), c.spikes))
    return found[:limit] if limit else found
