"""Square functions, Carleson sums, the L2 alpha bound, and CZ splitting.

The dyadic square function accumulates squared alpha-numbers along each
point's chain of dyadic intervals; the continuous variant integrates
squared smooth alpha-numbers of balls over scales.  Linear growth in depth
flags singular parts; converging partial sums flag absolute continuity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .measure import (
    Measure,
    dyadic_cell_masses,
    is_uniform_on,
    mass,
    restrict,
    scale,
    combine,
)
from .dyadic import (
    STANDARD,
    DyadicInterval,
    DyadicSystem,
    containing_interval,
    navigate,
)
from .alpha import AlphaTable, Ball, _compute_entry

__all__ = [
    "SquareFunctionProfile",
    "CZDecomposition",
    "mu_sampled_points",
    "dyadic_square_profile",
    "continuous_square_profile",
    "carleson_sum",
    "buckley_ratio",
    "delta_level_sums",
    "tolsa_l2",
    "cz_decompose",
    "martingale_diff",
    "domination_check",
]


@dataclass(frozen=True)
class SquareFunctionProfile:
    """Per-point partial sums of squared alphas over depths or scales."""

    points: np.ndarray
    grid: np.ndarray  # depths (dyadic) or radii (continuous, decreasing)
    partial_sums: np.ndarray  # shape (len(points), len(grid))
    mode: str

    def slopes(self):
        """Average increment per grid step for each point (tail half)."""
        n = self.partial_sums.shape[1]
        half = n // 2
        span = self.grid[-1] - self.grid[half] if self.mode == "dyadic" else \
            math.log(self.grid[half] / self.grid[-1])
        if span == 0:
            return np.zeros(len(self.points))
        return (self.partial_sums[:, -1] - self.partial_sums[:, half]) / span

    def final_increments(self, start_index):
        """Total growth of each partial sum past the given grid index."""
        return self.partial_sums[:, -1] - self.partial_sums[:, start_index]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            key = "depth" if self.mode == "dyadic" else "radius"
            w.writerow(["point", key, "partial_sum"])
            for i, x in enumerate(self.points):
                for g, s in zip(self.grid, self.partial_sums[i]):
                    w.writerow([repr(float(x)), repr(float(g)),
                                repr(float(s))])

    def summary(self):
        return {
            "mode": self.mode,
            "points": len(self.points),
            "mean_final": float(self.partial_sums[:, -1].mean()),
            "max_final": float(self.partial_sums[:, -1].max()),
            "mean_slope": float(np.mean(self.slopes())),
        }


def mu_sampled_points(mu: Measure, n, depth, seed=0):
    """Cell centers at the working depth, drawn with probability ~ mass."""
    rng = np.random.default_rng(seed)
    cells = dyadic_cell_masses(mu, depth)
    total = cells.sum()
    if total <= 0:
        raise ValueError("measure has no mass")
    idx = rng.choice(cells.size, size=n, p=cells / total)
    return (idx + 0.5) / cells.size


def dyadic_square_profile(mu: Measure, nu: Measure, system=STANDARD,
                          points=(), depth=12, table=None):
    """Partial sums of alpha^2 along each point's dyadic chain."""
    if depth > system.max_level:
        raise ValueError("depth exceeds the system's max level")
    if table is None:
        table = AlphaTable(mu, nu)
    pts = np.asarray(points, dtype=float)
    scaled = pts * (1 << depth)
    if np.any(scaled == np.floor(scaled)):
        import warnings
        from .measure import BoundaryAtomWarning
        warnings.warn("sample point on a dyadic boundary",
                      BoundaryAtomWarning)
    sums = np.zeros((pts.size, depth + 1))
    for i, x in enumerate(pts):
        acc = 0.0
        for j in range(depth + 1):
            I = containing_interval(system, float(x), j)
            a = table.alpha(I)
            acc += a * a
            sums[i, j] = acc
    return SquareFunctionProfile(pts, np.arange(depth + 1), sums, "dyadic")


def continuous_square_profile(mu: Measure, nu: Measure, points, r_min,
                              pts_per_octave=4, table=None):
    """Trapezoid quadrature of alpha_s^2(B(x, r)) dr/r from r_min to 1.

    The grid is refined (nodes per octave doubled) until the total changes
    by less than 1%.  Partial sums run from r = 1 downward, so they grow
    as the radius shrinks.
    """
    if r_min <= 0 or r_min >= 1:
        raise ValueError("need 0 < r_min < 1")
    if table is None:
        table = AlphaTable(mu, nu)
    pts = np.asarray(points, dtype=float)

    def quad(ppo):
        n_oct = math.log2(1.0 / r_min)
        n = max(2, int(round(n_oct * ppo)) + 1)
        t = np.linspace(math.log(r_min), 0.0, n)
        radii = np.exp(t)
        vals = np.empty((pts.size, n))
        for i, x in enumerate(pts):
            for j, r in enumerate(radii):
                vals[i, j] = table.alpha_smooth(Ball(float(x), float(r))) ** 2
        dt = t[1] - t[0]
        # cumulative trapezoid from the top scale (r = 1) downward
        seg = (vals[:, 1:] + vals[:, :-1]) / 2.0 * dt
        csum = np.concatenate(
            [np.zeros((pts.size, 1)), np.cumsum(seg[:, ::-1], axis=1)], axis=1)
        return radii[::-1], csum  # radii decreasing, sums increasing

    ppo = pts_per_octave
    radii, sums = quad(ppo)
    for _ in range(3):
        radii2, sums2 = quad(2 * ppo)
        tot1, tot2 = sums[:, -1], sums2[:, -1]
        denom = np.maximum(np.abs(tot2), 1e-30)
        if np.all(np.abs(tot2 - tot1) / denom < 0.01):
            radii, sums = radii2, sums2
            break
        ppo *= 2
        radii, sums = radii2, sums2
    return SquareFunctionProfile(pts, radii, sums, "continuous")


# ---------------------------------------------------------------------------
# Carleson sums and the Buckley ratio


def _both_uniform(mu, nu, a, b):
    cu = is_uniform_on(mu, a, b)
    if cu is None:
        return False
    return is_uniform_on(nu, a, b) is not None


def carleson_sum(mu: Measure, nu: Measure, J: DyadicInterval, which="alpha",
                 depth=10, table=None):
    """Sum of coef^2(I) mu(I) over dyadic I inside J down to the depth.

    which selects alpha-numbers or Delta-numbers as the coefficient.
    Subtrees where both measures are uniform contribute nothing and are
    skipped.
    """
    if table is None and which == "alpha":
        table = AlphaTable(mu, nu)
    from .dyadic import delta as _delta

    def rec(I):
        mI = mass(mu, I.a, I.b)
        if mI == 0.0 or _both_uniform(mu, nu, I.a, I.b):
            return 0.0
        c = table.alpha(I) if which == "alpha" else _delta(mu, nu, I)
        out = c * c * mI
        if I.j < depth:
            out += rec(navigate(I, "left")) + rec(navigate(I, "right"))
        return out

    return rec(J)


def delta_level_sums(mu: Measure, nu: Measure, depth):
    """Per-level arrays of Delta^2(I) mu(I) and subtree sums, vectorized.

    Returns (contrib, subtree, mu_levels): contrib[j][k] is the term of the
    level-j cell, subtree[j][k] the full truncated Carleson sum below it.
    """
    mu_levels = [dyadic_cell_masses(mu, j) for j in range(depth + 1)]
    nu_levels = [dyadic_cell_masses(nu, j) for j in range(depth + 1)]
    contrib = []
    for j in range(depth + 1):
        mI = mu_levels[j]
        nI = nu_levels[j]
        if j < depth:
            mL = mu_levels[j + 1][0::2]
            nL = nu_levels[j + 1][0::2]
        else:
            mL = dyadic_cell_masses(mu, j + 1)[0::2]
            nL = dyadic_cell_masses(nu, j + 1)[0::2]
        ok = (mI > 0) & (nI > 0)
        d = np.zeros_like(mI)
        d[ok] = np.abs(mL[ok] / mI[ok] - nL[ok] / nI[ok])
        contrib.append(d * d * mI)
    subtree = [None] * (depth + 1)
    subtree[depth] = contrib[depth].copy()
    for j in range(depth - 1, -1, -1):
        kids = subtree[j + 1]
        subtree[j] = contrib[j] + kids[0::2] + kids[1::2]
    return contrib, subtree, mu_levels


def buckley_ratio(mu: Measure, nu: Measure, depth, which="delta",
                  table=None):
    """sup over J (level <= depth/2) of carleson_sum(J) / mu(J)."""
    top_level = depth // 2
    if which == "delta":
        _, subtree, mu_levels = delta_level_sums(mu, nu, depth)
        best = 0.0
        for j in range(top_level + 1):
            mI = mu_levels[j]
            ok = mI > 0
            if np.any(ok):
                best = max(best, float(np.max(subtree[j][ok] / mI[ok])))
        return best
    if table is None:
        table = AlphaTable(mu, nu)
    best = 0.0
    cache = {}

    def subtree_sum(I):
        key = (I.j, I.k)
        if key in cache:
            return cache[key]
        mI = mass(mu, I.a, I.b)
        if mI == 0.0 or _both_uniform(mu, nu, I.a, I.b):
            cache[key] = 0.0
            return 0.0
        a = table.alpha(I)
        out = a * a * mI
        if I.j < depth:
            out += subtree_sum(navigate(I, "left"))
            out += subtree_sum(navigate(I, "right"))
        cache[key] = out
        return out

    for j in range(top_level + 1):
        for k in range(1 << j):
            J = STANDARD.interval(j, k)
            mJ = mass(mu, J.a, J.b)
            if mJ > 0:
                best = max(best, subtree_sum(J) / mJ)
    return best


# ---------------------------------------------------------------------------
# Tolsa-style L2 bound


def tolsa_l2(gdensity: Measure, nu: Measure, system=STANDARD, depth=8,
             gdepth=None, table=None):
    """(lhs, l2norm, ratio) for the squared-alpha L2 bound.

    gdensity is mu = g dnu with g piecewise constant at resolution gdepth
    (inferred from the piece count when omitted).  lhs sums
    alpha^2(I) mu(I)^2 / nu(I) over levels <= depth; l2norm is int g^2 dnu.
    """
    mu = gdensity
    if mu.atom_x.size:
        raise ValueError("density measure cannot carry atoms")
    if gdepth is None:
        n = max(mu.piece_l.size, 1)
        gdepth = max(int(math.ceil(math.log2(n))), 0)
    mu_cells = dyadic_cell_masses(mu, gdepth)
    nu_cells = dyadic_cell_masses(nu, gdepth)
    if np.any((mu_cells > 0) & (nu_cells == 0)):
        raise ValueError("mu is not absolutely continuous at g-resolution")
    ok = nu_cells > 0
    l2 = float(np.sum(mu_cells[ok] ** 2 / nu_cells[ok]))
    if table is None:
        table = AlphaTable(mu, nu)
    lhs = 0.0

    def rec(I):
        nonlocal lhs
        nI = mass(nu, I.a, I.b)
        if nI == 0.0:
            return
        if _both_uniform(mu, nu, I.a, I.b):
            return
        mI = mass(mu, I.a, I.b)
        a = table.alpha(I)
        lhs += a * a * mI * mI / nI
        if I.j < depth:
            rec(navigate(I, "left"))
            rec(navigate(I, "right"))

    rec(STANDARD.root())
    ratio = lhs / l2 if l2 > 0 else 0.0
    return lhs, l2, ratio


# ---------------------------------------------------------------------------
# Calderon-Zygmund decomposition


@dataclass(frozen=True)
class CZDecomposition:
    lam: float
    bad: tuple  # maximal intervals with mu(I) > lam nu(I)
    good: Measure
    bad_ratios: tuple  # mu(I)/nu(I) per bad interval
    depth: int

    def bad_union_nu(self, nu: Measure):
        return sum(mass(nu, I.a, I.b) for I in self.bad)


def cz_decompose(mu: Measure, nu: Measure, lam, system=STANDARD,
                 depth=10) -> CZDecomposition:
    """Split mu at level lam relative to nu.

    Maximal dyadic intervals with mu(I) > lam nu(I) become the bad set;
    the good part is mu off their union plus (mu(I)/nu(I)) nu on each bad
    interval.  Bad parts b_I = mu|_I - (mu(I)/nu(I)) nu|_I have zero mass
    by construction.
    """
    if lam < 1:
        raise ValueError("lambda must be at least 1")
    bad = []
    ratios = []
    stack = [STANDARD.root() if system is STANDARD else system.root()]
    good_regions = []

    def scan(I):
        mI = mass(mu, I.a, I.b)
        nI = mass(nu, I.a, I.b)
        if nI > 0 and mI > lam * nI:
            bad.append(I)
            ratios.append(mI / nI)
            return
        if I.j < depth and mI > 0:
            scan(navigate(I, "left"))
            scan(navigate(I, "right"))

    scan(stack[0])
    parts = []
    cursor = 0.0
    for I in sorted(bad, key=lambda I: I.a):
        if I.a > cursor:
            parts.append(restrict(mu, cursor, I.a))
        r = mass(mu, I.a, I.b) / mass(nu, I.a, I.b)
        parts.append(scale(restrict(nu, I.a, I.b), r))
        cursor = I.b
    if cursor < 1.0:
        parts.append(restrict(mu, cursor, 1.0))
    good = combine(parts) if parts else mu
    return CZDecomposition(float(lam), tuple(bad), good, tuple(ratios), depth)


def martingale_diff(gdensity: Measure, nu: Measure, I=None, depth=8):
    """Child-average tables of the nu-martingale differences of g.

    Returns {(j, k): (parent_avg, left_avg, right_avg)} for intervals with
    nu-mass below I; averages are mu(J)/nu(J) with mu = g dnu.
    """
    if I is None:
        I = STANDARD.root()
    out = {}

    def rec(J):
        nJ = mass(nu, J.a, J.b)
        if nJ == 0.0 or J.j >= depth:
            return
        mid = 0.5 * (J.a + J.b)
        nL = mass(nu, J.a, mid)
        nR = nJ - nL
        if nL == 0.0 or nR == 0.0:
            return
        avg = mass(gdensity, J.a, J.b) / nJ
        la = mass(gdensity, J.a, mid) / nL
        ra = mass(gdensity, mid, J.b) / nR
        out[(J.j, J.k)] = (avg, la, ra)
        rec(navigate(J, "left"))
        rec(navigate(J, "right"))

    rec(I)
    return out


# ---------------------------------------------------------------------------
# continuous-vs-dyadic domination


@dataclass(frozen=True)
class DominationReport:
    x: float
    r: float
    alpha_s_sq: float
    bound: float
    covering: tuple
    ok: bool


def domination_check(mu: Measure, nu: Measure, x, r, systems,
                     level_offset=0) -> DominationReport:
    """alpha_s^2(B(x, r)) against the best shifted-system interval bound.

    For each system whose level-j interval J contains B (with
    2^-j in [8r, 16r)), the stability and smoothness bounds give
    alpha_s(B) <= (2/theta)(nu(phi_J)/nu(phi_B)) * (2/nu_J(phi)) alpha(J)
    with theta = 2r/|J|; the check asserts the square of the smallest such
    bound dominates alpha_s^2(B).
    """
    ball = Ball(float(x), float(r))
    eB = _compute_entry(mu, nu, ball.x - ball.r, ball.x + ball.r, True)
    a_s2 = eB.alpha_smooth ** 2
    j = math.floor(math.log2(1.0 / (8.0 * r)))
    while 2.0 ** (-j) < 8.0 * r:
        j -= 1
    while 2.0 ** (-j) >= 16.0 * r:
        j += 1
    j = max(j + level_offset, 0)
    best = math.inf
    used = []
    for system in systems:
        J = containing_interval(system, x - r, j)
        if x + r > J.b:
            continue
        eJ = _compute_entry(mu, nu, J.a, J.b, False)
        nJ = mass(nu, J.a, J.b)
        if eJ.nu_phi <= 0 or eB.nu_phi <= 0 or nJ <= 0:
            continue
        theta = 2.0 * r / J.length
        K = ((2.0 / theta) * (eJ.nu_phi / eB.nu_phi)
             * (2.0 * nJ / eJ.nu_phi)) ** 2
        bound = K * eJ.alpha ** 2
        if bound < best:
            best = bound
        used.append(J)
    ok = a_s2 <= best + 1e-9
    return DominationReport(float(x), float(r), a_s2, best, tuple(used), ok)
