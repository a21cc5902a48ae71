"""Desk-scale reproductions of the failure mechanisms built on tree weights.

Every routine here is a finite computation; the asymptotic statements it
illustrates are evidenced by trends over ``N`` and by partial sums.

* :func:`weak_type_ratio` builds the test function ``f = w T*w / (Mw)^2`` on the
  sub-resolved J-cubes of the adjoint tree, evaluates ``T f`` by direct
  summation, and compares ``sup_lambda lambda w(|Tf| > lambda)`` with
  ``int |f| Mw``.
* :func:`two_weight_ratio` compares ``int |Tf|^p w`` with
  ``int |f|^p (Mw/w)^p w`` for the same ``f``.
* :func:`hump_gliding_series`, :func:`cross_hump_bound` and
  :func:`local_a1_check` handle the glued weight ``sum_N w_N(. - 3^N z)``,
  stored as per-hump trees plus integer translations.
* :func:`reverse_holder_series` sums the ``L^{1+eps}`` series exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from ._accel import core
from .kernel import KernelSpec
from .maximal import box_mass, maximal_lower
from .potential import CellSet, integrate_cells
from .singular import potential_at
from .weight import BuildParams, WeightTree, build

__all__ = [
    "HarnessParams",
    "HarnessReport",
    "MW_MODES",
    "FField",
    "f_field",
    "WeakTypeResult",
    "weak_type_ratio",
    "two_weight_ratio",
    "hump_stats",
    "HumpStats",
    "hump_gliding_series",
    "cross_hump_bound",
    "calibrate_cross_hump",
    "local_a1_check",
    "reverse_holder_series",
    "dual_form_note",
    "lambda_sweep",
    "apply_T",
    "MEASURES",
]

MW_MODES = ("w", "upper", "lower")


@dataclass(frozen=True)
class HarnessParams:
    """Exponents, hump range and discretization of the harness runs.

    ``z`` is the translation direction (default the first axis) and ``s``
    the number of triadic subdivisions of each J-cube used to sample ``f``.
    """

    p: float = 2.0
    eps: float = 0.75
    N0: int = 4
    N_max: int = 7
    d: int = 1
    K: int = 1
    s: int = 1
    z: tuple | None = None
    series_span: int = 10

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not 1 / self.p < self.eps < 1:
            raise ValueError("eps must lie strictly between 1/p and 1")
        if self.N0 < 2 or self.N_max < self.N0:
            raise ValueError("need 2 <= N0 <= N_max")
        if self.s < 0 or self.s > 2:
            raise ValueError("sub-resolution s must be 0, 1 or 2")
        z = self.z if self.z is not None else (1,) + (0,) * (self.d - 1)
        if len(z) != self.d or sorted(abs(int(v)) for v in z) != [0] * (self.d - 1) + [1]:
            raise ValueError("z must be a signed coordinate axis")
        object.__setattr__(self, "z", tuple(int(v) for v in z))

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1)


@dataclass
class HarnessReport:
    """Per-N statistics, tables and trend flags of one harness run."""

    name: str
    params: dict
    per_N: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"name": self.name, "params": self.params, "per_N": {str(k): v for k, v in self.per_N.items()},
                "tables": self.tables, "flags": self.flags, "notes": self.notes}


# -- sampled test function ---------------------------------------------------

@dataclass
class FField:
    """Sub-resolved support cells of a tree with the sampled quantities on them."""

    tree: WeightTree
    level: np.ndarray  # per-cell triadic level
    coords: np.ndarray  # per-cell coordinates at that level
    gen: np.ndarray
    is_j: np.ndarray  # False on leaf cells, which stand in for later generations
    vol: np.ndarray
    w: np.ndarray
    mw: np.ndarray
    tstar_w: np.ndarray
    f: np.ndarray
    tf: np.ndarray | None = None

    @property
    def mass(self) -> np.ndarray:
        return self.w * self.vol


def _subcells(tree: WeightTree, s: int):
    """Every merged support block split ``3^s``-fold per axis."""
    d = tree.d
    offs = np.stack(np.meshgrid(*([np.arange(3**s)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    levels, coords, gens, is_j = [], [], [], []
    for b in tree.support_blocks(merged=True):
        j = np.asarray(b["coords"], dtype=np.int64)
        c = (j[:, None, :] * 3**s + offs[None, :, :]).reshape(-1, d)
        coords.append(c)
        levels.append(np.full(len(c), b["level"] + s))
        gens.append(np.full(len(c), b["k"]))
        is_j.append(np.full(len(c), b["kind"] == "J"))
    return np.concatenate(levels), np.vstack(coords), np.concatenate(gens), np.concatenate(is_j)


def _centers(level: np.ndarray, coords: np.ndarray) -> list[tuple[Fraction, ...]]:
    return [tuple(Fraction(2 * int(c) + 1, 2 * 3 ** int(l)) for c in row) for l, row in zip(level, coords)]


def f_field(tree: WeightTree, s: int = 1, mw_mode: str = "w", weight_scale: float = 1.0,
            f_on_leaves: bool = False) -> FField:
    """Sample ``f = w T*w / (Mw)^2`` on the support of ``tree`` (an adjoint tree).

    Cells cover the whole support; ``f`` is set to zero on leaf blocks
    unless ``f_on_leaves``, since ``Mw ~ w`` is certified only on J-cubes.
    ``mw_mode`` picks ``Mw``: ``"w"`` uses ``w`` itself (``Mw ~ w`` on the
    support), ``"upper"`` the certified ``9^d w`` and ``"lower"`` the
    structured lower bound.  ``weight_scale`` multiplies ``w`` throughout.
    """
    if mw_mode not in MW_MODES:
        raise ValueError(f"unknown Mw mode {mw_mode!r}")
    level, coords, gen, is_j = _subcells(tree, s)
    pts = _centers(level, coords)
    tsw, _ = potential_at(tree, pts)
    alpha = np.array([float(a) for a in tree.alpha])
    w = alpha[gen] * weight_scale
    tsw = tsw * weight_scale
    if mw_mode == "w":
        mw = w.copy()
    elif mw_mode == "upper":
        mw = 9.0**tree.d * w
    else:
        mw = np.array([maximal_lower(tree, x).lower for x in pts]) * weight_scale
    f = w * tsw / mw**2
    if not f_on_leaves:
        f = np.where(is_j, f, 0.0)
    vol = 3.0 ** (-tree.d * level.astype(float))
    return FField(tree, level, coords, gen, is_j, vol, w, mw, tsw, f)


def apply_T(kernel: KernelSpec, ff: FField, targets: np.ndarray | None = None) -> np.ndarray:
    """``T f`` at the centers of the selected cells (default all) by direct
    summation over the f-cells; unselected entries are NaN."""
    L = int(ff.level.max())
    scale = 2 * 3 ** (L - ff.level)
    live = ff.f != 0
    cells = CellSet(L, (ff.coords * scale[:, None])[live], scale.astype(np.int64)[live],
                    ff.f[live].astype(float), ff.gen.astype(np.int16)[live])
    centers = ff.coords * scale[:, None] + (scale // 2)[:, None]
    out = np.full(len(ff.f), np.nan)
    sel = np.arange(len(ff.f)) if targets is None else np.flatnonzero(targets)
    for i in sel:
        s, _ = integrate_cells(kernel, cells, centers[i].astype(np.int64))
        out[i] = s[0]
    return out


MEASURES = ("J", "support")


def _measure_mask(ff: FField, measure: str) -> np.ndarray:
    if measure == "J":
        return ff.is_j
    if measure == "support":
        return np.ones(len(ff.f), dtype=bool)
    raise ValueError(f"unknown measure {measure!r}")


def lambda_sweep(values: np.ndarray, masses: np.ndarray) -> tuple[float, float, np.ndarray]:
    """``sup_lambda lambda * mu(|g| > lambda)`` for a discrete distribution.

    The supremum is approached as ``lambda`` rises to an attained value
    ``v``, where the level set is ``{|g| >= v}``.  Returns the supremum, the
    maximizing ``lambda`` and the table ``(lambda, mu(|g| >= lambda))``.
    """
    v = np.abs(np.asarray(values, dtype=float))
    m = np.asarray(masses, dtype=float)
    order = np.argsort(-v, kind="stable")
    vs, ms = v[order], np.cumsum(m[order])
    # group equal values so the level set includes all ties
    last = np.r_[vs[1:] != vs[:-1], True]
    lam, mu = vs[last], ms[last]
    prod = lam * mu
    i = int(np.argmax(prod))
    return float(prod[i]), float(lam[i]), np.stack([lam, mu], axis=1)


class WeakTypeResult(NamedTuple):
    lhs: float
    rhs: float
    lambda0: float
    adjoint_energy: float  # int |T*w / Mw|^2 w
    tf_w: float  # int T f w over the chosen measure; equals adjoint_energy only when that is all of the support
    cells: int

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def _adjoint_tree(d: int, N: int, kernel: KernelSpec, K: int) -> WeightTree:
    return build(BuildParams(N, d, K, kernel, adjoint=True, max_support_cells=None))


def weak_type_ratio(d: int, N: int, kernel: KernelSpec, K: int = 1, s: int = 1, mw_mode: str = "w",
               tree: WeightTree | None = None, measure: str = "J", f_on_leaves: bool = False) -> WeakTypeResult:
    """Weak-type ratio ``sup_lambda lambda w(|Tf| > lambda) / int |f| Mw``.

    The tree is built for the adjoint kernel.  ``measure="J"`` takes the
    level sets and integrals over the J-cubes (the support of the untruncated
    weight); ``"support"`` also counts the leaf blocks.
    """
    tree = _adjoint_tree(d, N, kernel, K) if tree is None else tree
    ff = f_field(tree, s, mw_mode, f_on_leaves=f_on_leaves)
    m = _measure_mask(ff, measure)
    ff.tf = apply_T(kernel, ff, m)
    lhs, lam0, _ = lambda_sweep(ff.tf[m], ff.mass[m])
    rhs = float(np.sum(np.abs(ff.f) * ff.mw * ff.vol))
    adjoint_energy = float(np.sum(ff.f * ff.tstar_w * ff.vol))
    tfw = float(np.sum(ff.tf[m] * ff.mass[m]))
    return WeakTypeResult(lhs, rhs, lam0, adjoint_energy, tfw, len(ff.f))


def two_weight_ratio(tree: WeightTree, kernel: KernelSpec, p: float = 2.0, s: int = 1, mw_mode: str = "w",
                     weight_scale: float = 1.0, measure: str = "J", f_on_leaves: bool = False) -> tuple[float, float]:
    """``(int |Tf|^p w, int |f|^p (Mw/w)^p w)``; ``measure`` as in :func:`weak_type_ratio`."""
    ff = f_field(tree, s, mw_mode, weight_scale, f_on_leaves=f_on_leaves)
    m = _measure_mask(ff, measure)
    tf = apply_T(kernel, ff, m)
    lhs = float(np.sum(np.abs(tf[m]) ** p * ff.mass[m]))
    rhs = float(np.sum(np.abs(ff.f) ** p * (ff.mw / ff.w) ** p * ff.mass))
    return lhs, rhs


# -- humps -------------------------------------------------------------------

@dataclass(frozen=True)
class HumpStats:
    N: int
    c: float  # int over the middle children of J-cubes of |T w|^p w^(1-p)
    w_hat: float  # w of that set
    min_ratio: float  # min |T w| / w there
    points: int


def hump_stats(tree: WeightTree, p: float, s: int = 1) -> HumpStats:
    """Sub-resolved ``int |T w|^p w^{1-p}`` over the middle children of the J-cubes."""
    N, d = tree.N, tree.d
    s = min(s, 1)
    offs = np.stack(np.meshgrid(*([np.arange(3**s)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    pts, w, vol = [], [], []
    for k in range(tree.K + 1):
        mid = tree.j_coords(k).astype(np.int64) * 3 + 1
        c = (mid[:, None, :] * 3**s + offs[None, :, :]).reshape(-1, d)
        lvl = N * (k + 1) + 1 + s
        pts.extend(tuple(Fraction(2 * int(v) + 1, 2 * 3**lvl) for v in row) for row in c)
        w.append(np.full(len(c), float(tree.alpha[k])))
        vol.append(np.full(len(c), 3.0 ** (-d * lvl)))
    w, vol = np.concatenate(w), np.concatenate(vol)
    tw, _ = potential_at(tree, pts)
    c = float(np.sum(np.abs(tw) ** p * w ** (1 - p) * vol))
    return HumpStats(N, c, float(np.sum(w * vol)), float(np.min(np.abs(tw) / w)), len(pts))


def hump_gliding_series(params: HarnessParams, per_N_stats: Mapping[int, HumpStats | float],
                        C: float = 1.0) -> dict:
    """Partial sums of the divergent A-series and the convergent B-bound.

    ``A_partials[m] = sum_{N0..m} N^{-eps p} c_N`` over the ``N`` with
    statistics; ``B_bound_partials[m] = sum_{N0..m} (sum_{J != N} J^{-eps}
    C 3^{-dN/2} 3^{-dJ/2})^p`` for ``m`` up to ``N0 + series_span``; the
    reference series is ``sum N^{p(1-eps)}``.  The normalized A-series
    divides each ``c_N`` by the mass of its integration set, which is
    about one in the untruncated construction and about ``K/A`` here.
    """
    p, eps, d, N0 = params.p, params.eps, params.d, params.N0
    Ns = sorted(n for n in per_N_stats if n >= N0)
    a_terms, an_terms, ref_terms = [], [], []
    for n in Ns:
        st = per_N_stats[n]
        c = st.c if isinstance(st, HumpStats) else float(st)
        # a truncated tree holds only part of the mass on the middle
        # children; the normalized term divides that share out
        share = st.w_hat if isinstance(st, HumpStats) else 1.0
        a_terms.append(n ** (-eps * p) * c)
        an_terms.append(n ** (-eps * p) * c / share)
        ref_terms.append(n ** (p * (1 - eps)))
    A = list(itertools.accumulate(a_terms))
    An = list(itertools.accumulate(an_terms))
    ref = list(itertools.accumulate(ref_terms))

    # inner sums over J run to where the geometric tail is below 1e-30
    j_max = N0 + params.series_span + int(math.ceil(140 / d)) + 5
    js = np.arange(N0, j_max + 1, dtype=float)
    inner_all = js ** (-eps) * 3.0 ** (-d * js / 2)
    b_terms = []
    Ms = list(range(N0, N0 + params.series_span + 1))
    for n in Ms:
        inner = math.fsum(inner_all[js != n])
        b_terms.append((C * 3.0 ** (-d * n / 2) * inner) ** p)
    B = list(itertools.accumulate(b_terms))
    # tail after the last partial: every inner sum is at most the full one,
    # leaving a geometric series in 3^(-dN/2)
    q = 3.0 ** (-d * p / 2)
    tail_bound = (C * math.fsum(inner_all)) ** p * 3.0 ** (-d * p * (Ms[-1] + 1) / 2) / (1 - q)
    return {
        "N": Ns,
        "A_terms": a_terms,
        "A_partials": A,
        "reference_partials": ref,
        "A_over_reference": [a / r for a, r in zip(A, ref)],
        "A_normalized_partials": An,
        "A_normalized_over_reference": [a / r for a, r in zip(An, ref)],
        "m": Ms,
        "B_terms": b_terms,
        "B_bound_partials": B,
        "B_tail_bound": tail_bound,
    }


def _hump_cells(tree: WeightTree, shift: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Support cells of a hump in physical floats: low corners, sides, densities."""
    lo, side, dens = [], [], []
    for b in tree.support_blocks(merged=True):
        h = 3.0 ** (-b["level"])
        c = np.asarray(b["coords"], dtype=float)
        lo.append(c * h + np.asarray(shift, dtype=float)[None, :])
        side.append(np.full(len(c), h))
        dens.append(np.full(len(c), float(b["density"])))
    return np.vstack(lo), np.concatenate(side), np.concatenate(dens)


def _sample_grid(d: int, n: int = 5) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    return np.stack(np.meshgrid(*([t] * d), indexing="ij"), axis=-1).reshape(-1, d)


def cross_hump_bound(d: int, N: int, J: int, kernel: KernelSpec, C: float | None = None,
                     K: int = 1, z: Sequence[int] | None = None, trees: dict | None = None) -> tuple[float, float]:
    """``max_{x in Q_N} |T w_J(x)|`` for the hump ``J`` translated by ``3^J z``,
    and the bound ``C 3^{-dN/2} 3^{-dJ/2}``.

    ``C`` defaults to the value calibrated on the smallest pair, see
    :func:`calibrate_cross_hump`.
    """
    if N == J:
        raise ValueError("cross-hump bound needs N != J")
    z = np.asarray(z if z is not None else (1,) + (0,) * (d - 1))
    trees = {} if trees is None else trees
    if J not in trees:
        trees[J] = build(BuildParams(J, d, K, kernel, max_support_cells=None))
    lo, side, dens = _hump_cells(trees[J], z * 3**J)
    xs = _sample_grid(d) + (z * 3**N)[None, :]
    fam, axis, scale = kernel.core_args()
    group = np.zeros(len(side), dtype=np.int64)
    best = 0.0
    for x in xs:
        sums, _, near = core.cells_potential(fam, axis, scale, lo - x[None, :], side, dens, group, 1, 0)
        if len(near):
            raise RuntimeError("humps too close for the far-field rule")
        best = max(best, abs(float(sums[0])))
    if C is None:
        C = calibrate_cross_hump(d, kernel, min(N, J), K=K, z=tuple(z), trees=trees)
    return best, C * 3.0 ** (-d * N / 2) * 3.0 ** (-d * J / 2)


def calibrate_cross_hump(d: int, kernel: KernelSpec, N0: int, K: int = 1, z=None, trees: dict | None = None) -> float:
    """The constant making the bound tight on the pair ``(N0, N0+1)`` in
    either order; fixed thereafter."""
    best = 0.0
    for n, j in ((N0, N0 + 1), (N0 + 1, N0)):
        act, unit = cross_hump_bound(d, n, j, kernel, C=1.0, K=K, z=z, trees=trees)
        best = max(best, act / unit)
    return best


def local_a1_check(trees: Mapping[int, WeightTree], z: Sequence[int] | None = None, samples: int = 20,
                   reach: int | None = None) -> dict:
    """Maximal lower bounds of the glued weight at support points of each hump.

    Candidate cubes are those of :func:`maximal_lower` plus triadic cubes of
    side ``3, 9, ..., 3^reach`` (and their 3x and 9x enlargements) that can
    reach neighboring humps.  For each hump the report gives the largest
    ``lower / (9^d w(x))`` and the largest cross-hump share of a candidate
    average relative to ``9^d w(x)``.
    """
    Ns = sorted(trees)
    d = trees[Ns[0]].d
    z = np.asarray(z if z is not None else (1,) + (0,) * (d - 1), dtype=np.int64)
    reach = Ns[-1] + 1 if reach is None else reach
    out = {}
    for N in Ns:
        tree = trees[N]
        pts = []
        for k in range(tree.K + 1):
            for row in tree.j_coords(k)[: max(1, samples // (tree.K + 1))]:
                pts.append((k, tuple(Fraction(2 * int(c) + 1, 2 * 3 ** (tree.N * (k + 1))) for c in row)))
        worst_ratio, worst_corr, single_ratio = 0.0, 0.0, 0.0
        for k, x in pts[:samples]:
            w = tree.alpha[k]
            cap = 9**d * w
            est = maximal_lower(tree, x)
            single_ratio = max(single_ratio, float(est.lower_exact / cap))
            best = est.lower_exact
            corr = Fraction(0)
            gx = [xi + int(zi) * 3**N for xi, zi in zip(x, z)]
            for m in range(1, reach + 1):
                side = 3**m
                c = [math.floor(v / side) for v in gx]
                for f, offsets in ((1, [(0,) * d]), (3, list(itertools.product(range(3), repeat=d))),
                                   (9, list(itertools.product((0, 4, 8), repeat=d)))):
                    for o in offsets:
                        lo = [(ci - oi) * side for ci, oi in zip(c, o)]
                        S = f * side
                        own, other = Fraction(0), Fraction(0)
                        for h, th in trees.items():
                            sh = [int(zi) * 3**h for zi in z]
                            llo = [a - b for a, b in zip(lo, sh)]
                            if any(a >= 1 or a + S <= 0 for a in llo):
                                continue
                            mass = box_mass(th, llo, S, 0)
                            if h == N:
                                own += mass
                            else:
                                other += mass
                        vol = Fraction(S) ** d
                        best = max(best, (own + other) / vol)
                        corr = max(corr, other / vol / cap)
            worst_ratio = max(worst_ratio, float(best / cap))
            worst_corr = max(worst_corr, float(corr))
        out[N] = {"points": min(samples, len(pts)), "max_lower_over_cap": worst_ratio,
                  "single_hump_max_lower_over_cap": single_ratio, "cross_hump_correction": worst_corr,
                  "bracket_holds": worst_ratio <= 1.0 + worst_corr}
    return out


# -- series ------------------------------------------------------------------

def reverse_holder_series(d: int, N: int, A: int, eps, terms: int) -> tuple[list, object, bool]:
    """Partial sums of ``(1/A) sum_{k=0}^{n} rho^{k+1}``,
    ``rho = 3^{eps N d} A / (1+A)^{1+eps}``.

    Exact rationals when ``eps N d`` and ``1 + eps`` give integer powers,
    otherwise 60-digit decimals.  Returns ``(partials, rho, rho > 1)``.
    """
    if A < 1:
        raise ValueError("A must be at least 1")
    e = Fraction(eps).limit_denominator(10**9) if not isinstance(eps, Fraction) else eps
    if e < 0:
        raise ValueError("eps must be nonnegative")
    if (e * N * d).denominator == 1 and e.denominator == 1:
        rho = Fraction(3 ** int(e * N * d) * A, (1 + A) ** int(1 + e))
        partials, acc, term = [], Fraction(0), Fraction(1, A)
        for _ in range(terms + 1):
            term *= rho
            acc += term
            partials.append(acc)
        return partials, rho, rho > 1
    with localcontext() as ctx:
        ctx.prec = 60
        de = Decimal(e.numerator) / Decimal(e.denominator)
        rho = (Decimal(3) ** (de * N * d)) * A / (Decimal(1 + A) ** (1 + de))
        partials, acc, term = [], Decimal(0), Decimal(1) / A
        for _ in range(terms + 1):
            term *= rho
            acc += term
            partials.append(acc)
        return partials, rho, rho > 1


def dual_form_note(p: float, trees: Mapping[int, WeightTree], eps: float = 0.75, s: int = 1) -> dict:
    """Compare ``int |T(gw)|^{p'} w / (Mw)^{p'}`` with ``int |T(gw)|^{p'} w^{1-p'}``
    hump by hump, with ``g = N^{-eps}`` on hump ``N``.

    ``Mw`` is the structured lower bound at each J-cube center, so the
    pointwise ratio of integrands ``(w/Mw)^{p'}`` lies in ``[9^{-dp'}, 1]``
    whenever the certified bracket holds.
    """
    pc = p / (p - 1)
    rows, lhs_acc, rhs_acc = [], 0.0, 0.0
    ratio_lo, ratio_hi = math.inf, 0.0
    for N in sorted(trees):
        tree = trees[N]
        pts, w, vol, mw = [], [], [], []
        for k in range(tree.K + 1):
            a = float(tree.alpha[k])
            lvl = tree.N * (k + 1) + 1
            for row in tree.j_coords(k):
                mid = tuple(3 * int(c) + 1 for c in row)
                x = tuple(Fraction(2 * c + 1, 2 * 3**lvl) for c in mid)
                pts.append(x)
                w.append(a)
                vol.append(3.0 ** (-tree.d * lvl))
        w, vol = np.asarray(w), np.asarray(vol)
        mw = np.array([maximal_lower(tree, x).lower for x in pts])
        tgw, _ = potential_at(tree, pts)
        tgw = N ** (-eps) * tgw
        ratio = (w / mw) ** pc
        ratio_lo, ratio_hi = min(ratio_lo, float(ratio.min())), max(ratio_hi, float(ratio.max()))
        lhs = float(np.sum(np.abs(tgw) ** pc * w / mw**pc * vol))
        rhs = float(np.sum(np.abs(tgw) ** pc * w ** (1 - pc) * vol))
        lhs_acc += lhs
        rhs_acc += rhs
        rows.append({"N": N, "dual": lhs, "weighted": rhs, "dual_partial": lhs_acc, "weighted_partial": rhs_acc})
    d = trees[sorted(trees)[0]].d
    return {
        "p": p,
        "p_conj": pc,
        "rows": rows,
        "pointwise_ratio_range": [ratio_lo, ratio_hi],
        "bracket": [9.0 ** (-d * pc), 1.0],
        "bracket_holds": ratio_lo >= 9.0 ** (-d * pc) * (1 - 1e-12) and ratio_hi <= 1.0 + 1e-12,
        "note": "Both partial sums grow with the hump count; at finite truncation divergence is shown only by growth.",
    }
