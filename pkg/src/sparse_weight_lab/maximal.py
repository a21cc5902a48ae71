"""Hardy-Littlewood maximal function of tree weights and of step weights.

For tree weights the maximal function is bracketed: a lower bound from a
structured family of candidate cubes (exact in d=1, where every breakpoint
interval is searched), and the certified upper bound ``9^d w(x)`` on
``J``-cubes, valid once the same-size mass bound has
been checked exhaustively for that generation.  All masses are exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CertificateMissing, NotOnSupport, TooLarge
from .potential import CellSet
from .triadic import TriadicAddress
from .weight import WeightTree, _j_of

__all__ = [
    "MaximalEstimate",
    "StepWeight",
    "CertificateReport",
    "box_mass",
    "maximal_lower",
    "verify_cube_bound",
    "certified_upper",
    "locate_j",
    "step_maximal",
    "step_maximal_all",
    "sv_bound_check",
    "SeparationReport",
    "verify_separation",
    "MAX_ENUMERATED_CUBES",
]

MAX_ENUMERATED_CUBES = 10_000_000


@dataclass(frozen=True)
class MaximalEstimate:
    x: tuple
    lower: float
    witness: tuple  # (low corner, side) as fractions
    certified_upper: float | None
    density_at_x: Fraction
    lower_exact: Fraction = Fraction(0)


@dataclass(frozen=True)
class CertificateReport:
    generation: int
    level: int
    checked: int
    violations: list
    equality_total: int
    equality_tree_cubes: int
    equality_j_cubes: int
    equality_other: int
    expected_tree_cubes: int
    expected_j_cubes: int

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def equality_as_expected(self) -> bool:
        return (
            self.equality_tree_cubes == self.expected_tree_cubes
            and self.equality_j_cubes == self.expected_j_cubes
            and self.equality_other == 0
        )

    def to_json(self) -> dict:
        return {
            "generation": self.generation,
            "level": self.level,
            "checked": self.checked,
            "violations": [[lvl, list(c), str(m)] for lvl, c, m in self.violations],
            "passed": self.passed,
            "equality_total": self.equality_total,
            "equality_tree_cubes": self.equality_tree_cubes,
            "equality_j_cubes": self.equality_j_cubes,
            "equality_other": self.equality_other,
            "expected_tree_cubes": self.expected_tree_cubes,
            "expected_j_cubes": self.expected_j_cubes,
        }


# -- exact box masses ------------------------------------------------------

def _exact_cells(tree: WeightTree, L: int) -> CellSet:
    cache = tree.__dict__.setdefault("_exact_cellsets", {})
    if L not in cache:
        cache[L] = CellSet.from_blocks(tree.support_blocks(merged=True), L)
    return cache[L]


def box_mass(tree: WeightTree, lo: Sequence[int], side: int, level: int) -> Fraction:
    """Exact ``w`` of the box ``3^-level * (lo + [0, side]^d)`` (integer ``lo``)."""
    L = max(level, tree.N * (tree.K + 1))
    cells = _exact_cells(tree, L)
    f = 2 * 3 ** (L - level)
    blo = np.asarray(lo, dtype=np.int64) * f
    bhi = blo + side * f
    ov = np.minimum(cells.lo + cells.side[:, None], bhi[None, :]) - np.maximum(cells.lo, blo[None, :])
    ov = np.maximum(ov, 0)
    vol = np.prod(ov, axis=1)
    hit = vol > 0
    if not hit.any():
        return Fraction(0)
    total = Fraction(0)
    ks = cells.k[hit]
    vols = vol[hit]
    for k in np.unique(ks):
        s = int(vols[ks == k].astype(object).sum())
        total += tree.alpha[int(k)] * s
    return total / (2 * 3**L) ** tree.d


def locate_j(tree: WeightTree, x: Sequence) -> tuple[int, int] | None:
    """``(generation, node index)`` of the J-cube containing ``x`` (half-open), or None."""
    xs = tuple(Fraction(v) for v in x)
    if any(not 0 <= v < 1 for v in xs):
        return None
    N = tree.N
    k, i = 0, 0
    while True:
        g = tree.gens[k]
        level = N * (k + 1)
        here = TriadicAddress.containing(xs, level)
        if here.coords == _j_of(tuple(int(v) for v in g.coords[i]), tree.sigmas[int(g.branch[i])], N):
            return k, i
        if k == tree.K:
            return None
        idx = tree.child_index(k, i, here.coords)
        if idx is None:
            return None
        k, i = k + 1, idx


def _candidates(x: tuple[Fraction, ...], depth: int):
    """Triadic cubes containing ``x`` and their 3x and 9x enlargements placed
    so the triadic cube sits at each of ``3^d`` lattice positions."""
    d = len(x)
    for m in range(depth + 1):
        n = 3**m
        c = [math.floor(v * n) for v in x]
        yield m, tuple(c), 1
        for o in itertools.product(range(3), repeat=d):
            yield m, tuple(ci - oi for ci, oi in zip(c, o)), 3
        for o in itertools.product((0, 4, 8), repeat=d):
            yield m, tuple(ci - oi for ci, oi in zip(c, o)), 9


def _upper_hull(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Indices of the upper convex hull of points sorted by ``px``."""
    hull: list[int] = []
    for i in range(len(px)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            if (px[a] - px[o]) * (py[i] - py[o]) - (py[a] - py[o]) * (px[i] - px[o]) >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=np.int64)


def _interval_max_1d(tree: WeightTree, xs: tuple[Fraction, ...]):
    """Exact best interval average about ``x`` in d=1, or None off the unit interval.

    The density is a step function, and on each step the average is a
    Moebius (so monotone) function of either endpoint, so both endpoints can
    be taken among the breakpoints and ``x``.  For a fixed left endpoint the
    best right endpoint is a vertex of the upper hull of the cumulative mass
    graph; the winning pair is then re-evaluated exactly.
    """
    L = tree.N * (tree.K + 1)
    cells = _exact_cells(tree, L)
    U = 2 * 3**L
    X = xs[0] * U
    lo = cells.lo[:, 0]
    order = np.argsort(lo, kind="stable")
    lo, side, ks = lo[order], cells.side[order], cells.k[order]
    dens = np.array([float(tree.alpha[int(k)]) for k in range(tree.K + 1)])[ks]
    e = np.concatenate([lo, lo + side]).astype(float)
    e_sorted = np.unique(e)
    cum = np.concatenate([[0.0], np.cumsum(dens * side)])
    # cumulative mass at each breakpoint: earlier cells plus the overlap with the last cell starting before it
    idx = np.searchsorted(lo, e_sorted, side="right") - 1
    Wb = np.where(idx >= 0, cum[np.maximum(idx, 0)] + dens[np.maximum(idx, 0)]
                  * np.clip(e_sorted - lo[np.maximum(idx, 0)], 0, side[np.maximum(idx, 0)]), 0.0)
    xf = float(X)
    i = int(np.searchsorted(lo, xf, side="right")) - 1
    Wx = 0.0 if i < 0 else float(cum[i] + dens[i] * min(max(xf - lo[i], 0.0), side[i]))
    left_x = np.concatenate([e_sorted[e_sorted < xf], [xf]])
    left_w = np.concatenate([Wb[e_sorted < xf], [Wx]])
    rmask = e_sorted > xf
    right_x, right_w = e_sorted[rmask], Wb[rmask]
    best, pair = -np.inf, None
    for with_x in (False, True):
        rx = np.concatenate([[xf], right_x]) if with_x else right_x
        rw = np.concatenate([[Wx], right_w]) if with_x else right_w
        ax, aw = (left_x[:-1], left_w[:-1]) if with_x else (left_x[-1:], left_w[-1:])
        if len(rx) == 0 or len(ax) == 0:
            continue
        h = _upper_hull(rx, rw)
        hx, hw = rx[h], rw[h]
        for s in range(0, len(ax), 4096):
            sa, sw = ax[s:s + 4096, None], aw[s:s + 4096, None]
            slope = (hw[None, :] - sw) / (hx[None, :] - sa)
            j = np.unravel_index(int(np.argmax(slope)), slope.shape)
            if slope[j] > best:
                best, pair = float(slope[j]), (float(sa[j[0], 0]), float(hx[j[1]]))
    if pair is None:
        return None
    a = X if pair[0] == xf else Fraction(int(pair[0]))
    b = X if pair[1] == xf else Fraction(int(pair[1]))
    hi = lo + side
    hit = (hi > float(a)) & (lo < float(b))
    mass = Fraction(0)
    for c in np.flatnonzero(hit):
        ov = min(Fraction(int(hi[c])), b) - max(Fraction(int(lo[c])), a)
        if ov > 0:
            mass += tree.alpha[int(ks[c])] * ov
    return mass / (b - a), (a / U,), (b - a) / U


def maximal_lower(tree: WeightTree, x: Sequence, search_depth: int | None = None,
                  with_upper: bool = False) -> MaximalEstimate:
    """Lower bound for ``Mw(x)`` by exact averages over candidate boxes.

    Candidates are the triadic cubes containing ``x`` and their 3x and 9x
    enlargements.  In d=1 the best interval over all breakpoint pairs is
    added, which makes the value exact there.
    """
    xs = tuple(Fraction(v) for v in x)
    depth = tree.N * (tree.K + 1) if search_depth is None else search_depth
    if depth > tree.N * (tree.K + 1):
        raise ValueError("search depth beyond the finest support level")
    best, wit = Fraction(-1), None
    for m, lo, s in _candidates(xs, depth):
        avg = box_mass(tree, lo, s, m) * Fraction(3 ** (m * tree.d), s**tree.d)
        if avg > best:
            best, wit = avg, (tuple(Fraction(v, 3**m) for v in lo), Fraction(s, 3**m))
    if tree.d == 1 and search_depth is None:
        exact = _interval_max_1d(tree, xs)
        if exact is not None and exact[0] > best:
            best, wit = exact[0], (exact[1], exact[2])
    from .weight import density_at

    dens = density_at(tree, xs)
    upper = None
    if with_upper:
        upper = certified_upper(tree, xs, require_certificate=False)
    return MaximalEstimate(xs, float(best), wit, upper, dens, best)


def verify_cube_bound(tree: WeightTree, k: int, max_cubes: int = MAX_ENUMERATED_CUBES) -> CertificateReport:
    """Exhaustive exact check of ``w(L) <= alpha_k |L|`` over every triadic
    ``L`` at level ``N (k+1)``.

    The mass of every such cube is aggregated from the support cells in exact
    integer units.  Equality cases are split into generation-``(k+1)`` tree
    cubes and generation-``k`` J-cubes.
    """
    if not 0 <= k <= tree.K:
        raise ValueError(f"generation {k} outside 0..{tree.K}")
    d, N, A = tree.d, tree.N, tree.A
    m = N * (k + 1)
    n = 3**m
    total_cubes = n**d
    if total_cubes > max_cubes:
        raise TooLarge(f"{total_cubes} cubes exceed the enumeration limit {max_cubes}")
    Lf = N * (tree.K + 1)
    D = (1 + A) ** (tree.K + 1)
    mass = np.zeros(total_cubes, dtype=object)
    mass[:] = 0
    strides = np.array([n ** (d - 1 - i) for i in range(d)], dtype=np.int64)
    for block in tree.support_blocks(merged=False):
        lvl = block["level"]
        j = block["k"]
        unit = 3 ** (N * d * (j + 1)) * (1 + A) ** (tree.K - j)  # alpha_j * D
        coords = np.asarray(block["coords"], dtype=np.int64)
        if len(coords) == 0:
            continue
        if lvl >= m:
            per = unit * 3 ** ((Lf - lvl) * d)
            anc = coords // 3 ** (lvl - m)
            flat = anc @ strides
            uniq, cnt = np.unique(flat, return_counts=True)
            mass[uniq] += np.array([per * int(c) for c in cnt], dtype=object)
        else:
            per = unit * 3 ** ((Lf - m) * d)
            f = 3 ** (m - lvl)
            grid = np.stack(np.meshgrid(*([np.arange(f)] * d), indexing="ij"), axis=-1).reshape(-1, d)
            cubes = (coords[:, None, :] * f + grid[None, :, :]).reshape(-1, d)
            mass[cubes @ strides] += per
    bound = 3 ** (N * d * (k + 1)) * (1 + A) ** (tree.K - k) * 3 ** ((Lf - m) * d)
    over = np.flatnonzero(mass > bound)
    eq = np.flatnonzero(mass == bound)
    if k + 1 <= tree.K:
        tree_cubes = tree.gens[k + 1].coords
    else:
        tree_cubes = tree.all_children(tree.K)
    tree_flat = set((tree_cubes @ strides).tolist())
    j_flat = set((tree.j_coords(k) @ strides).tolist())
    eq_set = set(eq.tolist())
    scale = Fraction(1, D * 3 ** (Lf * d))

    def unflat(f):
        out = []
        for s in strides:
            out.append(int(f // s))
            f = f % s
        return tuple(out)

    violations = [(m, unflat(int(f)), mass[f] * scale) for f in over[:50]]
    report = CertificateReport(
        generation=k,
        level=m,
        checked=total_cubes,
        violations=violations,
        equality_total=len(eq_set),
        equality_tree_cubes=len(eq_set & tree_flat),
        equality_j_cubes=len(eq_set & j_flat),
        equality_other=len(eq_set - tree_flat - j_flat),
        expected_tree_cubes=A ** (k + 1),
        expected_j_cubes=A**k,
    )
    if report.passed:
        tree.__dict__.setdefault("_cube_bound_ok", set()).add(k)
    return report


def certified_upper(tree: WeightTree, x: Sequence, require_certificate: bool = True) -> float:
    """``9^d alpha_k`` for ``x`` in a generation-``k`` J-cube.

    Small cubes about ``x`` meet only ``J(Q)`` by the separation of J-cubes;
    larger ones are covered by at most ``9^d`` times their volume in
    same-size triadic cubes, each with mass at most ``alpha_k`` times volume.

    Raises
    ------
    NotOnSupport
        If ``x`` is not in a J-cube.
    CertificateMissing
        If the mass bound for that generation has not been verified.
    """
    loc = locate_j(tree, x)
    if loc is None:
        raise NotOnSupport("point is not in any J-cube of the tree")
    k, _ = loc
    if require_certificate and k not in tree.__dict__.get("_cube_bound_ok", set()):
        raise CertificateMissing(f"run verify_cube_bound for generation {k} first")
    return float(9**tree.d * tree.alpha[k])


@dataclass(frozen=True)
class SeparationReport:
    pairs: int
    min_ratio: Fraction  # least gap / side of the larger cube
    worst_pair: tuple | None
    passed: bool

    def to_json(self) -> dict:
        return {"pairs": self.pairs, "min_ratio": str(self.min_ratio), "min_ratio_float": float(self.min_ratio),
                "worst_pair": [list(map(int, p)) for p in self.worst_pair] if self.worst_pair else None,
                "passed": self.passed}


def verify_separation(tree: WeightTree, threshold: Fraction = Fraction(1, 4),
                      max_pairs: int = 10**9, chunk: int = 2_000_000) -> SeparationReport:
    """Sup-norm gap between every pair of J-cubes, relative to the larger side.

    The sup-norm gap never exceeds the Euclidean one, so passing here implies
    the Euclidean statement.  Worst pair is ``((generation, index), ...)``.
    """
    N, K, d = tree.N, tree.K, tree.d
    los, sides, gens = [], [], []
    for k in range(K + 1):
        f = 3 ** (N * (K - k))
        c = tree.j_coords(k).astype(np.int64) * f
        los.append(c)
        sides.append(np.full(len(c), f, dtype=np.int64))
        gens.append(np.stack([np.full(len(c), k), np.arange(len(c))], axis=1))
    lo = np.vstack(los)
    side = np.concatenate(sides)
    ids = np.vstack(gens)
    n = len(side)
    total = n * (n - 1) // 2
    if total > max_pairs:
        raise TooLarge(f"{total} J-cube pairs exceed the limit {max_pairs}")
    best = None
    best_pair = None
    rows = max(1, chunk // max(n, 1))
    for i0 in range(0, n, rows):
        i1 = min(n, i0 + rows)
        a_lo, a_side = lo[i0:i1, None, :], side[i0:i1, None]
        gap = np.maximum(np.maximum(lo[None, :, :] - (a_lo + a_side[..., None]), a_lo - (lo + side[:, None])[None, :, :]), 0)
        g = gap.max(axis=2)
        big = np.maximum(a_side, side[None, :])
        # only pairs j > i
        tri = np.arange(n)[None, :] > np.arange(i0, i1)[:, None]
        # compare g/big by cross-multiplication to stay exact
        if not tri.any():
            continue
        gi, gj = np.nonzero(tri)
        gv, bv = g[gi, gj], big[gi, gj]
        r = gv.astype(float) / bv.astype(float)
        m = int(np.argmin(r))
        cand = Fraction(int(gv[m]), int(bv[m]))
        if best is None or cand < best:
            best = cand
            best_pair = (tuple(int(v) for v in ids[i0 + gi[m]]), tuple(int(v) for v in ids[gj[m]]))
    if best is None:
        return SeparationReport(0, Fraction(0), None, True)
    return SeparationReport(total, best, best_pair, best >= threshold)


# -- step weights ------------------------------------------------------------

@dataclass(frozen=True)
class StepWeight:
    """Piecewise-constant weight on a uniform grid: cell ``i`` (multi-index in
    d=2) is ``origin + h * [i, i+1)`` with value ``values[i]``."""

    h: float
    values: np.ndarray
    origin: tuple = (0.0,)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise ValueError("step weights are supported in d=1 and d=2")
        if np.any(v < 0):
            raise ValueError("weight values must be nonnegative")
        object.__setattr__(self, "values", v)
        if len(self.origin) != v.ndim:
            object.__setattr__(self, "origin", (0.0,) * v.ndim)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def box(self):
        lo = np.asarray(self.origin, dtype=float)
        return lo, lo + self.h * np.asarray(self.values.shape)

    def restrict(self, mask: np.ndarray) -> "StepWeight":
        return StepWeight(self.h, np.where(mask, self.values, 0.0), self.origin)

    def midpoints(self) -> np.ndarray:
        idx = np.stack(np.meshgrid(*[np.arange(n) for n in self.values.shape], indexing="ij"), axis=-1).reshape(-1, self.d)
        return np.asarray(self.origin) + self.h * (idx + 0.5)


def _step_max_1d(v: StepWeight, x: float) -> float:
    vals = v.values
    n = len(vals)
    bp = v.origin[0] + v.h * np.arange(n + 1)
    cum = np.concatenate([[0.0], np.cumsum(vals * v.h)])

    def F(t):
        # cumulative mass up to t
        t = np.asarray(t, dtype=float)
        i = np.clip(np.floor((t - bp[0]) / v.h).astype(np.int64), 0, n - 1)
        inside = (t >= bp[0]) & (t <= bp[-1])
        part = cum[i] + vals[i] * (t - bp[i])
        return np.where(t < bp[0], 0.0, np.where(t > bp[-1], cum[-1], np.where(inside, part, 0.0)))

    left = np.concatenate([bp[bp <= x], [x]])
    right = np.concatenate([bp[bp >= x], [x]])
    a, b = np.meshgrid(left, right, indexing="ij")
    ok = b > a
    avg = np.where(ok, (F(b) - F(a)) / np.where(ok, b - a, 1.0), -np.inf)
    best = float(avg.max()) if ok.any() else 0.0
    # degenerate intervals shrinking to x: the value of w at x
    rel = (x - bp[0]) / v.h
    cands = []
    if 0 <= rel <= n:
        i = int(math.floor(rel))
        if i < n:
            cands.append(vals[i])
        if rel == i and i > 0:
            cands.append(vals[i - 1])
    return max([best] + [float(c) for c in cands])


def _step_max_2d(v: StepWeight, x: Sequence[float]) -> float:
    vals = v.values
    n0, n1 = vals.shape
    P = np.zeros((n0 + 1, n1 + 1))
    P[1:, 1:] = np.cumsum(np.cumsum(vals, axis=0), axis=1)
    ox, oy = v.origin
    gx = (x[0] - ox) / v.h
    gy = (x[1] - oy) / v.h
    best = 0.0
    nmax = max(n0, n1) + 2
    for s in range(1, nmax + 1):
        for i0 in range(int(math.ceil(gx - s)), int(math.floor(gx)) + 1):
            for j0 in range(int(math.ceil(gy - s)), int(math.floor(gy)) + 1):
                a0, a1 = max(i0, 0), min(i0 + s, n0)
                b0, b1 = max(j0, 0), min(j0 + s, n1)
                if a1 <= a0 or b1 <= b0:
                    continue
                mass = P[a1, b1] - P[a0, b1] - P[a1, b0] + P[a0, b0]
                best = max(best, mass / (s * s))
    return best


def step_maximal(v: StepWeight, x: Sequence) -> float:
    """Non-centered maximal function of a step weight at ``x``.

    In d=1 the value is exact: on each cell the average is a monotone
    function of either endpoint, so optimal endpoints are breakpoints or
    ``x`` itself (intervals shrinking to ``x`` give ``w(x)``).  In d=2 the
    value is a lower bound over squares with grid corners.
    """
    x = [float(t) for t in (x if isinstance(x, (list, tuple, np.ndarray)) else [x])]
    if v.d == 1:
        return _step_max_1d(v, x[0])
    return _step_max_2d(v, x)


def step_maximal_all(v: StepWeight, points: np.ndarray) -> np.ndarray:
    return np.array([step_maximal(v, p) for p in points])


def sv_bound_check(v: StepWeight, E: np.ndarray) -> tuple[float, float]:
    """``lhs = (int (M(chi_E v)/M v)^2 v)^(1/2)`` by cell-midpoint sums, and
    ``rhs = v(E)^(1/2)``."""
    E = np.asarray(E, dtype=bool).reshape(v.values.shape)
    vol = v.h**v.d
    support = v.values > 0
    rhs2 = float(np.sum((v.values * vol)[E & support]))
    if not E.any():
        return 0.0, 0.0
    pts = v.midpoints().reshape(v.values.shape + (v.d,))[support]
    mv = step_maximal_all(v, pts)
    vE = v.restrict(E)
    if np.array_equal(vE.values, v.values):
        mve = mv
    else:
        mve = step_maximal_all(vE, pts)
    ratio = mve / mv
    lhs2 = float(np.sum(ratio**2 * (v.values * vol)[support]))
    return math.sqrt(lhs2), math.sqrt(rhs2)
