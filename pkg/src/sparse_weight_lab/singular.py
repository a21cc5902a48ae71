"""``T w`` at support points, split into discrete and continuous pieces.

For ``x`` in the middle child of ``J(Q)``, ``Q`` a generation-``k`` node::

    T w(x) = I + II + III
    I   = integral over the complement of Q        = I1 + I2
    II  = integral over Q minus J(Q)               = II1 + II2
    III = alpha_k * p.v. integral over J(Q)

``I1`` is the node's stored discrete sum over same-size cubes, ``II1`` the
discrete sum over its children referred to the chosen vertex ``v``, and the
continuous pieces are the remainders ``I2 = I - I1``, ``II2 = II - II1``.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import NotOnSupport
from .triadic import middle_child
from .potential import CellSet, brute_force_cells, integrate_cells, point_units
from .weight import DROP_TAIL, TreeNode, WeightTree

__all__ = [
    "OperatorBreakdown",
    "AnnulusDiagnostics",
    "evaluate_breakdown",
    "annulus_diagnostics",
    "brute_force_T",
    "ratio_report",
    "sample_points",
    "sample_nodes",
    "RATIO_COLUMNS",
    "summarize_ratios",
    "ii1_value",
    "cells_for",
    "potential_at",
]


@dataclass(frozen=True)
class OperatorBreakdown:
    x: tuple
    generation: int
    node_index: int
    I1: float
    I2: float
    II1: float
    II2: float
    III: float
    total: float
    quad_err: float
    density: float
    i1_tie: bool = False

    @property
    def continuous(self) -> float:
        return abs(self.I2) + abs(self.II2) + abs(self.III)

    @property
    def ratio(self) -> float:
        return abs(self.total) / self.density

    def lower_bound(self) -> float:
        """``|I1 + II1| - (|I2| + |II2| + |III|)``, never above ``|total|``."""
        return abs(self.I1 + self.II1) - self.continuous


@dataclass(frozen=True)
class AnnulusDiagnostics:
    index: list
    counts: list
    inverse_distance_sums: list
    radii: list
    metric: str
    harmonic_sum: float | None = None
    inverse_distance_total: float = 0.0
    extras: dict = field(default_factory=dict)


def _fine_level(tree: WeightTree, extra: int = 0) -> int:
    return tree.N * (tree.K + 1) + 2 + extra


def cells_for(tree: WeightTree, L: int | None = None) -> CellSet:
    """Merged support cells of ``tree`` at lattice level ``L`` (cached)."""
    L = _fine_level(tree) if L is None else L
    cache = tree.__dict__.setdefault("_cellsets", {})
    if L not in cache:
        cache[L] = CellSet.from_blocks(tree.support_blocks(merged=True), L)
    return cache[L]


def _child_density(tree: WeightTree, k: int) -> Fraction:
    if k < tree.K:
        return tree.node_density(k + 1)
    return Fraction(0) if tree.params.truncation == DROP_TAIL else tree.alpha[tree.K]


def ii1_value(tree: WeightTree, node: TreeNode, reference: str = "corner") -> float:
    """``sum_L K(v, c_L) w(L)`` over the children of ``node``.

    Lengths are in units of the child side, where the sum is scale-free.
    ``reference="center"`` refers to the center of ``J(Q)`` instead of the
    vertex ``v`` (the Riesz-case variant).
    """
    n = 3 ** (tree.N - 1)
    pat = tree.patterns[node.branch].astype(float) + 0.5
    sig = np.asarray(node.sigma)
    if reference == "corner":
        ref = np.where(sig > 0, float(n), 0.0)
    elif reference == "center":
        ref = np.where(sig > 0, n + 0.5, -0.5)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    u = ref[None, :] - pat
    r = np.linalg.norm(u, axis=1)
    vals = tree.kernel.omega(u) / r**tree.d
    return float(_child_density(tree, node.generation)) * float(vals.sum())


def _node_groups(tree: WeightTree, node: TreeNode, cells: CellSet) -> np.ndarray:
    # the last node's grouping is kept; callers sweep points node by node
    key = (cells.L, node.generation, node.index)
    memo = tree.__dict__.get("_group_memo")
    if memo is not None and memo[0] == key:
        return memo[1]
    J = node.j_addr
    inside = cells.box_mask(node.addr.level, node.addr.coords)
    jmask = cells.cell_mask(J.level, J.coords)
    group = np.where(jmask, 2, np.where(inside, 1, 0)).astype(np.int64)
    tree.__dict__["_group_memo"] = (key, group)
    return group


def evaluate_breakdown(tree: WeightTree, node: TreeNode, x: Sequence, rel_tol: float = 1e-6,
                       reference: str = "corner", L: int | None = None) -> OperatorBreakdown:
    """The five-piece decomposition of ``T w(x)``.

    ``x`` must lie in the middle child of ``J(node)``; it is given exactly
    (fractions) and must be a triadic cube center at the lattice level.
    ``rel_tol`` is the requested accuracy of the continuous pieces; the tiered
    rules deliver far below it and the accumulated bound is returned.
    """
    J = node.j_addr
    mid = middle_child(J)
    if not mid.closed_contains_point(x):
        raise NotOnSupport(f"point {tuple(map(str, x))} is not in the middle child of J(Q)")
    cells = cells_for(tree, L)
    X = point_units(x, cells.L)
    group = _node_groups(tree, node, cells)
    sums, errs = integrate_cells(tree.kernel, cells, X, group, 3)
    I, II, III = (float(v) for v in sums)
    I1 = node.i1_value
    II1 = ii1_value(tree, node, reference)
    return OperatorBreakdown(
        x=tuple(x),
        generation=node.generation,
        node_index=node.index,
        I1=I1,
        I2=I - I1,
        II1=II1,
        II2=II - II1,
        III=III,
        total=I + II + III,
        quad_err=float(errs.sum()),
        density=float(tree.alpha[node.generation]),
        i1_tie=node.i1_sign == 0,
    )


def potential_at(tree: WeightTree, points: Sequence[Sequence], L: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``T w`` at lattice-center points anywhere off the cell boundaries,
    with accumulated quadrature bounds."""
    cells = cells_for(tree, L)
    vals = np.empty(len(points))
    errs = np.empty(len(points))
    for i, x in enumerate(points):
        s, e = integrate_cells(tree.kernel, cells, point_units(x, cells.L))
        vals[i], errs[i] = s[0], e[0]
    return vals, errs


def brute_force_T(tree: WeightTree, x: Sequence, rel_tol: float = 1e-10, L: int | None = None) -> float:
    """Independent oracle for ``T w(x)``: a flat sum over support cells."""
    cells = cells_for(tree, L)
    X = point_units(x, cells.L)
    total, _ = brute_force_cells(tree.kernel, cells, X, rel_tol)
    return total


def annulus_diagnostics(tree: WeightTree, node: TreeNode) -> AnnulusDiagnostics:
    """Children of ``node`` grouped by dyadic-in-3 shells around ``v``.

    The shell index of a child is the least ``i >= 1`` with
    ``|c_L - v| <= 3^i`` child sides (Euclidean distance in cap mode,
    sup-distance in full-cone mode, decided exactly on doubled integers).
    """
    N, d = tree.N, tree.d
    n = 3 ** (N - 1)
    pat = tree.patterns[node.branch].astype(np.int64)
    sig = np.asarray(node.sigma)
    v2 = np.where(sig > 0, 2 * n, 0)
    u2 = 2 * pat + 1 - v2[None, :]
    full = tree.full_mode
    idx = np.empty(len(pat), dtype=np.int64)
    if full:
        m = np.abs(u2).max(axis=1)
        for r, mm in enumerate(m):
            i = 1
            while mm > 2 * 3**i:
                i += 1
            idx[r] = i
    else:
        q = (u2**2).sum(axis=1)
        for r, qq in enumerate(q):
            i = 1
            while qq > 4 * 9**i:
                i += 1
            idx[r] = i
    dist = np.linalg.norm(u2 / 2.0, axis=1)
    mass = float(_child_density(tree, node.generation))
    imax = int(idx.max())
    ell = 3.0 ** (-N * (node.generation + 1))
    counts, sums, radii = [], [], []
    for i in range(1, imax + 1):
        sel = idx == i
        counts.append(int(sel.sum()))
        sums.append(mass * float((1.0 / dist[sel] ** d).sum()))
        radii.append((3.0 ** (i - 1) * ell, 3.0**i * ell))
    harmonic = None
    if full:
        j = tree.kernel.axis
        c2 = np.where(sig > 0, 2 * n + 1, -1)
        w2 = 2 * pat + 1 - c2[None, :]
        sup = np.abs(w2).max(axis=1) / 2.0
        harmonic = float((np.abs(w2[:, j]) / 2.0 / sup ** (d + 1)).sum())
    return AnnulusDiagnostics(
        index=list(range(1, imax + 1)),
        counts=counts,
        inverse_distance_sums=sums,
        radii=radii,
        metric="sup" if full else "euclidean",
        harmonic_sum=harmonic,
        inverse_distance_total=float(sum(sums)),
    )


def sample_nodes(tree: WeightTree, k: int, limit: int = 64) -> np.ndarray:
    """All node indices if at most ``limit``, else a lexicographic stride."""
    n = tree.node_count(k)
    if n <= limit:
        return np.arange(n)
    coords = tree.gens[k].coords
    order = np.lexsort(coords.T[::-1])
    return order[(np.arange(limit) * n) // limit]


def sample_points(node: TreeNode, count: int | None = None) -> list[tuple[Fraction, ...]]:
    """Center of ``J(Q)`` followed by the ``2^d`` points offset by a ninth of
    its side toward each corner; all are in the middle child of ``J(Q)``."""
    c = node.j_addr.center
    h = node.j_addr.side / 9
    pts = [c]
    for s in itertools.product((-1, 1), repeat=len(c)):
        pts.append(tuple(ci + si * h for ci, si in zip(c, s)))
    return pts if count is None else pts[:count]


RATIO_COLUMNS = ["d", "N", "K", "generation", "node_id", "x", "I1", "I2", "II1", "II2", "III", "total", "ratio", "ratio_over_N", "quad_err"]


def _threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SWL_THREADS")
    return max(1, int(env)) if env else 1


def ratio_report(tree: WeightTree, samples_per_node: int | None = None, node_limit: int = 64,
                 threads: int | None = None, generations: Sequence[int] | None = None) -> list[dict]:
    """Rows of ``|T w(x)| / w(x)`` with the full breakdown at sampled points."""
    cells_for(tree)
    jobs = []
    gens = range(tree.K + 1) if generations is None else generations
    for k in gens:
        for i in sample_nodes(tree, k, node_limit):
            node = tree.node(k, int(i))
            for x in sample_points(node, samples_per_node):
                jobs.append((node, x))

    def run(job):
        node, x = job
        return node, x, evaluate_breakdown(tree, node, x)

    n_threads = _threads(threads)
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    rows = []
    for node, x, b in results:
        rows.append(
            dict(
                d=tree.d, N=tree.N, K=tree.K, generation=node.generation, node_id=node.index,
                x=" ".join(f"{float(v):.17g}" for v in x),
                I1=b.I1, I2=b.I2, II1=b.II1, II2=b.II2, III=b.III, total=b.total,
                ratio=b.ratio, ratio_over_N=b.ratio / tree.N, quad_err=b.quad_err,
                continuous=b.continuous / b.density,
            )
        )
    return rows


def summarize_ratios(rows: list[dict]) -> dict:
    """Per-generation minima of the ratio and of the continuous-piece ratio."""
    out = {}
    for r in rows:
        g = out.setdefault(r["generation"], {"min_ratio": math.inf, "max_continuous": 0.0, "points": 0})
        g["min_ratio"] = min(g["min_ratio"], r["ratio"])
        g["max_continuous"] = max(g["max_continuous"], r["continuous"])
        g["points"] += 1
    glob = min((g["min_ratio"] for g in out.values()), default=math.nan)
    N = rows[0]["N"] if rows else 1
    return {"generations": out, "min_ratio": glob, "min_ratio_over_N": glob / N,
            "max_continuous": max((g["max_continuous"] for g in out.values()), default=math.nan)}
