"""Finite-depth construction of the fractal weight ``w_N``.

Generation ``k`` of the tree is a family of triadic cubes at level ``N k``.
Each node ``Q`` owns a corner cube ``J(Q)`` at level ``N (k + 1)`` carrying the
constant density ``alpha_k = a^(k+1)`` and ``A`` children inside the middle
child ``Q^``.  Which corner of ``Q^`` is used (and hence where the children
sit) follows the sign of the discrete sum ``I_1(Q)`` over same-size cubes.

The tree is stored as per-generation numpy arrays.  The children of node
``i`` of generation ``k`` are rows ``i*A .. (i+1)*A - 1`` of generation
``k + 1``, in the lexicographic order of the child offset pattern of the
node's branch.  Masses and densities are exact :class:`Fraction` values.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from ._accel import core
from .errors import ConeTooNarrow, FormatError, TooDeep, TooLarge
from .kernel import ConeData, KernelSpec, find_cones, kernel_value, parse_kernel
from .triadic import TriadicAddress, cone_offsets

__all__ = [
    "BuildParams",
    "Generation",
    "WeightTree",
    "TreeNode",
    "build",
    "cube_mass",
    "density_at",
    "i1_discrete",
    "support_cells",
    "serialize",
    "deserialize",
    "LEAF_UNIFORM",
    "DROP_TAIL",
    "validate",
]

LEAF_UNIFORM = "leaf_uniform"
DROP_TAIL = "drop_tail"
TIE_REL = 1e-13
# pair evaluations above which the 1-d run/Chebyshev route replaces direct sums
DIRECT_PAIR_LIMIT = 3e8
MAX_DIRECT_PAIRS = 2e10
# integer coordinates must fit in int64 and stay exact in float64
MAX_LEVEL = 33
DEFAULT_MAX_SUPPORT_CELLS = 1_000_000
DEFAULT_MAX_NODES = 10_000_000


@dataclass(frozen=True)
class BuildParams:
    """Inputs of :func:`build`.

    ``kernel`` is the operator ``T`` itself; with ``adjoint=True`` the tree is
    built for ``T*`` (kernel ``K(y, x)``).  ``cone_mode`` is ``"full"``
    (every subcube of the middle child is a child, Riesz/Hilbert only),
    ``"cap"`` (children whose centers lie in the cap cone) or ``"auto"``.
    ``tie_break`` is the branch (+1 or -1) taken when ``I_1`` is a tie.
    """

    N: int
    d: int
    K: int
    kernel: KernelSpec
    cones: ConeData | None = None
    adjoint: bool = False
    truncation: str = LEAF_UNIFORM
    tie_break: int = 1
    cone_mode: str = "auto"
    max_support_cells: int | None = DEFAULT_MAX_SUPPORT_CELLS
    max_nodes: int | None = DEFAULT_MAX_NODES

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.K < 0:
            raise ValueError("depth K must be nonnegative")
        if self.d != self.kernel.d:
            raise ValueError(f"kernel dimension {self.kernel.d} does not match d={self.d}")
        if self.truncation not in (LEAF_UNIFORM, DROP_TAIL):
            raise ValueError(f"unknown truncation mode {self.truncation!r}")
        if self.tie_break not in (1, -1):
            raise ValueError("tie_break must be +1 or -1")
        if self.cone_mode not in ("auto", "full", "cap"):
            raise ValueError(f"unknown cone mode {self.cone_mode!r}")
        if self.resolved_cone_mode == "full" and self.kernel.family != 0:
            raise ValueError("full-cone mode requires a Riesz kernel")

    @property
    def effective_kernel(self) -> KernelSpec:
        return self.kernel.adjoint_spec() if self.adjoint else self.kernel

    @property
    def resolved_cone_mode(self) -> str:
        if self.cone_mode != "auto":
            return self.cone_mode
        return "full" if self.kernel.family == 0 else "cap"


@dataclass
class Generation:
    """Arrays describing the nodes of one generation.

    ``coords`` are at level ``N k``; ``branch`` is the chosen sign (+1/-1);
    ``tie`` flags nodes whose ``I_1`` was within rounding of zero.
    """

    coords: np.ndarray
    i1: np.ndarray
    i1_abs: np.ndarray
    branch: np.ndarray
    tie: np.ndarray

    def __len__(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class TreeNode:
    addr: TriadicAddress
    generation: int
    index: int
    i1_value: float
    i1_abs: float
    i1_sign: int  # +1, -1, or 0 for a tie
    branch: int
    sigma: tuple[int, ...]
    j_addr: TriadicAddress
    tree: "WeightTree" = field(repr=False, compare=False)

    @property
    def hat(self) -> TriadicAddress:
        return TriadicAddress(self.addr.level + 1, tuple(3 * c + 1 for c in self.addr.coords))

    @property
    def vertex(self) -> tuple[Fraction, ...]:
        h = self.hat
        return tuple(hi if s > 0 else lo for lo, hi, s in zip(h.low, h.high, self.sigma))

    @property
    def child_addrs(self) -> list[TriadicAddress]:
        lvl = self.tree.N * (self.generation + 1)
        return [TriadicAddress(lvl, tuple(int(v) for v in row)) for row in self.tree.child_coords(self.generation, self.index)]

    @property
    def child_indices(self) -> range:
        A = self.tree.A
        return range(self.index * A, (self.index + 1) * A)


class WeightTree:
    """The built weight: tree arrays, child patterns and exact densities."""

    def __init__(self, params: BuildParams, cones: ConeData, patterns: dict, gens: list[Generation]):
        self.params = params
        self.cones = cones
        self.patterns = patterns
        self.gens = gens
        self.N, self.d, self.K = params.N, params.d, params.K
        self.A = len(patterns[1])
        self.a = Fraction(3 ** (self.N * self.d), 1 + self.A)
        self.alpha = [self.a ** (k + 1) for k in range(self.K + 1)]
        self.sigmas = {b: cones.sigma(b) for b in (1, -1)}
        self._pattern_index = {
            b: {tuple(int(v) for v in row): i for i, row in enumerate(patterns[b])} for b in (1, -1)
        }

    # -- structure -------------------------------------------------------
    @property
    def kernel(self) -> KernelSpec:
        return self.params.effective_kernel

    @property
    def full_mode(self) -> bool:
        return self.params.resolved_cone_mode == "full"

    def node_count(self, k: int) -> int:
        return len(self.gens[k])

    def sigma_array(self, k: int) -> np.ndarray:
        b = self.gens[k].branch
        sp = np.array(self.sigmas[1], dtype=np.int64)
        sm = np.array(self.sigmas[-1], dtype=np.int64)
        return np.where(b[:, None] > 0, sp[None, :], sm[None, :])

    def j_coords(self, k: int) -> np.ndarray:
        """Coordinates of ``J(Q)`` at level ``N (k+1)`` for generation ``k``."""
        c = self.gens[k].coords
        f = 3 ** (self.N - 1)
        s = self.sigma_array(k)
        return np.where(s > 0, (3 * c + 2) * f, (3 * c + 1) * f - 1)

    def child_coords(self, k: int, i: int) -> np.ndarray:
        f = 3 ** (self.N - 1)
        base = (3 * self.gens[k].coords[i] + 1) * f
        return base[None, :] + self.patterns[int(self.gens[k].branch[i])]

    def node(self, k: int, i: int) -> TreeNode:
        g = self.gens[k]
        branch = int(g.branch[i])
        coords = tuple(int(v) for v in g.coords[i])
        jc = _j_of(coords, self.sigmas[branch], self.N)
        return TreeNode(
            addr=TriadicAddress(self.N * k, coords),
            generation=k,
            index=i,
            i1_value=float(g.i1[i]),
            i1_abs=float(g.i1_abs[i]),
            i1_sign=0 if g.tie[i] else (1 if g.i1[i] > 0 else -1),
            branch=branch,
            sigma=self.sigmas[branch],
            j_addr=TriadicAddress(self.N * (k + 1), jc),
            tree=self,
        )

    def nodes(self, k: int) -> Iterator[TreeNode]:
        for i in range(len(self.gens[k])):
            yield self.node(k, i)

    def child_index(self, k: int, i: int, child: Sequence[int]) -> int | None:
        """Row in generation ``k+1`` of the child with coordinates ``child``,
        or ``None`` if that cube is not a child of node ``i``."""
        f = 3 ** (self.N - 1)
        base = [(3 * int(c) + 1) * f for c in self.gens[k].coords[i]]
        off = tuple(int(c) - b for c, b in zip(child, base))
        pos = self._pattern_index[int(self.gens[k].branch[i])].get(off)
        if pos is None:
            return None
        return i * self.A + pos

    # -- masses -----------------------------------------------------------
    def node_density(self, k: int) -> Fraction:
        """Average density ``w(Q)/|Q|`` of a generation-``k`` node."""
        if k == 0:
            return self.total_mass
        base = self.a**k
        if self.params.truncation == LEAF_UNIFORM:
            return base
        q = Fraction(self.A, 1 + self.A)
        return base * (1 - q ** (self.K - k + 1))

    @cached_property
    def total_mass(self) -> Fraction:
        """Exact total mass, summed from the actual cell counts."""
        total = Fraction(0)
        for k, g in enumerate(self.gens):
            total += len(g) * self.alpha[k] * Fraction(1, 3 ** (self.N * (k + 1) * self.d))
        if self.params.truncation == LEAF_UNIFORM:
            leaves = len(self.gens[-1]) * self.A
            total += leaves * self.alpha[-1] * Fraction(1, 3 ** (self.N * (self.K + 1) * self.d))
        return total

    def support_blocks(self, merged: bool = True) -> list[dict]:
        """Constant-density cell blocks of the support.

        Each block has ``level``, ``coords`` (n, d), ``density`` (Fraction),
        ``k`` (density index) and ``kind`` (``"J"`` or ``"leaf"``).  With
        ``merged`` and full-cone mode the leaves of a generation-``K`` node
        are returned as its whole middle child.
        """
        blocks = []
        for k in range(self.K + 1):
            blocks.append(dict(level=self.N * (k + 1), coords=self.j_coords(k), density=self.alpha[k], k=k, kind="J"))
        if self.params.truncation == LEAF_UNIFORM:
            c = self.gens[self.K].coords
            if merged and self.full_mode:
                blocks.append(dict(level=self.N * self.K + 1, coords=3 * c + 1, density=self.alpha[self.K], k=self.K, kind="leaf"))
            else:
                blocks.append(dict(level=self.N * (self.K + 1), coords=self.all_children(self.K), density=self.alpha[self.K], k=self.K, kind="leaf"))
        return blocks

    def all_children(self, k: int) -> np.ndarray:
        """Coordinates of every child of generation ``k`` in generation order."""
        g = self.gens[k]
        f = 3 ** (self.N - 1)
        base = (3 * g.coords + 1) * f
        pp = np.asarray(self.patterns[1])
        pm = np.asarray(self.patterns[-1])
        out = np.where(
            (g.branch > 0)[:, None, None],
            base[:, None, :] + pp[None, :, :],
            base[:, None, :] + pm[None, :, :],
        )
        return out.reshape(-1, self.d)

    def support_cell_count(self, merged: bool = True) -> int:
        return sum(len(b["coords"]) for b in self.support_blocks(merged))


def _j_of(coords, sigma, N):
    f = 3 ** (N - 1)
    return tuple((3 * c + 2) * f if s > 0 else (3 * c + 1) * f - 1 for c, s in zip(coords, sigma))


# -- construction ---------------------------------------------------------

def _child_patterns(params: BuildParams, cones: ConeData) -> dict:
    d, depth = params.d, params.N - 1
    if params.resolved_cone_mode == "full":
        n = 3**depth
        grid = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), axis=-1).reshape(-1, d)
        return {1: grid.astype(np.int64), -1: grid.astype(np.int64)}
    pats = {}
    for b in (1, -1):
        pats[b] = cone_offsets(depth, d, cones.sigma(b), cones.child_axis(b), cones.r).astype(np.int64)
    if len(pats[1]) == 0 or len(pats[-1]) == 0:
        raise ConeTooNarrow(f"cone of radius {cones.r} selects no child at N={params.N}; increase N or r")
    if len(pats[1]) != len(pats[-1]):
        raise ConeTooNarrow(f"branch child counts differ ({len(pats[1])} vs {len(pats[-1])})")
    return pats


def _check_size(params: BuildParams, A: int):
    N, d, K = params.N, params.d, params.K
    if N * (K + 1) + 2 > MAX_LEVEL:
        raise TooDeep(f"level N(K+1)={N * (K + 1)} exceeds the exact integer range")
    nodes = sum(A**k for k in range(K + 1))
    if params.max_nodes is not None and nodes > params.max_nodes:
        raise TooLarge(f"{nodes} tree nodes exceed the limit {params.max_nodes}")
    cells = nodes
    if params.truncation == LEAF_UNIFORM:
        cells += A**K if params.resolved_cone_mode == "full" else A ** (K + 1)
    if params.max_support_cells is not None and cells > params.max_support_cells:
        raise TooLarge(f"{cells} support cells exceed the limit {params.max_support_cells}")


def build(params: BuildParams, i1_route: str | None = None) -> WeightTree:
    """Build generations ``0..K`` of the weight tree.

    ``I_1`` of a generation-``k`` node only involves masses at level ``N k``,
    which are fixed once generations ``< k`` are built, so generations are
    produced in order.  ``i1_route`` forces ``"direct"`` or ``"runs"`` for
    cross-checking; by default the route depends on ``(N, k, d)`` only.

    Raises
    ------
    ConeTooNarrow
        If the cone selects no children or the two branches disagree on ``A``.
    TooLarge, TooDeep
        If a resource guard trips.
    """
    kern = params.effective_kernel
    cones = params.cones if params.cones is not None else find_cones(kern)
    patterns = _child_patterns(params, cones)
    A = len(patterns[1])
    _check_size(params, A)
    d, N = params.d, params.N
    root = Generation(
        coords=np.zeros((1, d), dtype=np.int64),
        i1=np.zeros(1),
        i1_abs=np.zeros(1),
        branch=np.array([params.tie_break], dtype=np.int8),
        tie=np.array([True]),
    )
    tree = WeightTree(params, cones, patterns, [root])
    for k in range(1, params.K + 1):
        coords = tree.all_children(k - 1)
        i1, i1_abs = _compute_i1(tree, k, coords, i1_route)
        tie = ~(np.abs(i1) > TIE_REL * i1_abs)
        branch = np.where(tie, params.tie_break, np.where(i1 > 0, 1, -1)).astype(np.int8)
        tree.gens.append(Generation(coords, i1, i1_abs, branch, tie))
    return tree


def _route(tree: WeightTree, k: int) -> str:
    n_t = tree.A**k
    n_s = n_t + sum(tree.A**j * 3 ** (tree.N * (k - j - 1) * tree.d) for j in range(k))
    if n_t * n_s <= DIRECT_PAIR_LIMIT or tree.d != 1:
        if n_t * n_s > MAX_DIRECT_PAIRS:
            raise TooLarge(f"I1 at generation {k} needs {n_t * n_s:.3g} pair evaluations")
        return "direct"
    return "runs"


def _compute_i1(tree: WeightTree, k: int, coords: np.ndarray, route: str | None):
    route = route or _route(tree, k)
    if route == "direct":
        return _i1_direct(tree, k, coords)
    if route == "runs":
        if tree.d != 1 or not tree.full_mode:
            raise ValueError("the run route needs d=1 in full-cone mode")
        return _i1_runs(tree, k, coords)
    raise ValueError(f"unknown I1 route {route!r}")


def _i1_sources(tree: WeightTree, k: int, coords: np.ndarray):
    """Level-``N k`` unit cells carrying mass: nodes of generation ``k`` and
    the J-cubes of earlier generations split into units."""
    d, N = tree.d, tree.N
    pos = [coords.astype(float) + 0.5]
    dens = [np.full(len(coords), float(tree.node_density(k)))]
    for j in range(k):
        f = 3 ** (N * (k - j - 1))
        jc = tree.j_coords(j)
        grid = np.stack(np.meshgrid(*([np.arange(f)] * d), indexing="ij"), axis=-1).reshape(-1, d)
        units = (jc[:, None, :] * f + grid[None, :, :]).reshape(-1, d)
        pos.append(units.astype(float) + 0.5)
        dens.append(np.full(len(units), float(tree.alpha[j])))
    return np.vstack(pos), np.concatenate(dens)


def _i1_direct(tree: WeightTree, k: int, coords: np.ndarray):
    src, dens = _i1_sources(tree, k, coords)
    fam, axis, scale = tree.kernel.core_args()
    return core.pair_sum(fam, axis, scale, coords.astype(float) + 0.5, src, dens)


_CHEB_P = 24


def _i1_runs(tree: WeightTree, k: int, coords: np.ndarray):
    """d=1 full-cone route: sources are runs of equal-mass unit cells.

    A run's kernel sum is a digamma difference.  For the targets inside one
    parent's middle child, the field of all runs outside the parent is smooth
    (their distance is at least the interval length) and is interpolated from
    Chebyshev nodes; the own run and the parent's J-cube are added exactly.
    """
    N, A = tree.N, tree.A
    fam, axis, scale = tree.kernel.core_args()
    n = 3 ** (N - 1)
    parents = tree.gens[k - 1].coords[:, 0]
    hat_lo = (3 * parents + 1) * n
    rho_t = float(tree.node_density(k))
    run_lo, run_cnt, run_den = [hat_lo], [np.full(len(hat_lo), n)], [np.full(len(hat_lo), rho_t)]
    for j in range(k):
        f = 3 ** (N * (k - j - 1))
        jc = tree.j_coords(j)[:, 0]
        run_lo.append(jc * f)
        run_cnt.append(np.full(len(jc), f))
        run_den.append(np.full(len(jc), float(tree.alpha[j])))
    run_lo = np.concatenate(run_lo)
    run_cnt = np.concatenate(run_cnt)
    run_den = np.concatenate(run_den)
    order = np.argsort(run_lo, kind="stable")
    run_lo, run_cnt, run_den = run_lo[order], run_cnt[order], run_den[order]
    run_end = run_lo + run_cnt
    jp = tree.j_coords(k - 1)[:, 0]
    # Chebyshev points of the first kind and barycentric weights
    m = np.arange(_CHEB_P)
    theta = (2 * m + 1) * np.pi / (2 * _CHEB_P)
    cheb_x = np.cos(theta)
    cheb_w = (-1.0) ** m * np.sin(theta)
    G = len(parents)
    left_vals = np.empty((G, _CHEB_P))
    right_vals = np.empty((G, _CHEB_P))
    lo_f = run_lo.astype(float)
    cnt_f = run_cnt.astype(float)
    for g in range(G):
        a0 = int(hat_lo[g])
        nodes = a0 + 0.5 * n * (cheb_x + 1.0)
        iL = int(np.searchsorted(run_end, a0, side="right"))
        iR = int(np.searchsorted(run_lo, a0 + n, side="left"))
        if jp[g] < a0:
            iL -= 1  # J(P) is the last run on the left
        else:
            iR += 1  # J(P) is the first run on the right
        left_vals[g] = core.run_field_1d(nodes, lo_f[:iL], cnt_f[:iL], run_den[:iL]) if iL > 0 else 0.0
        right_vals[g] = core.run_field_1d(nodes, lo_f[iR:], cnt_f[iR:], run_den[iR:]) if iR < len(lo_f) else 0.0
    # targets: parent g, position s in its run
    s = np.tile(np.arange(n), G)
    g_of = np.repeat(np.arange(G), n)
    t_pos = coords[:, 0].astype(float) + 0.5
    xi = (2.0 * (t_pos - hat_lo[g_of]) / n) - 1.0
    num_l = np.zeros(len(s))
    num_r = np.zeros(len(s))
    den = np.zeros(len(s))
    for j in range(_CHEB_P):
        wj = cheb_w[j] / (xi - cheb_x[j])
        num_l += wj * left_vals[g_of, j]
        num_r += wj * right_vals[g_of, j]
        den += wj
    far_l = num_l / den
    far_r = num_r / den
    harm = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, n + 1))])
    own = rho_t * (harm[s] - harm[n - 1 - s])
    own_abs = rho_t * (harm[s] + harm[n - 1 - s])
    jterm = float(tree.alpha[k - 1]) / (coords[:, 0] - jp[g_of]).astype(float)
    i1 = scale * (far_l + far_r + own + jterm)
    i1_abs = abs(scale) * (np.abs(far_l) + np.abs(far_r) + own_abs + np.abs(jterm))
    return i1, i1_abs


# -- exact queries -------------------------------------------------------

def _exact_box(addr: TriadicAddress):
    return addr.level, addr.coords


def _overlap_volume(l1, c1, l2, c2, d) -> Fraction:
    """Exact volume of the intersection of two triadic cubes."""
    m = max(l1, l2)
    f1, f2 = 3 ** (m - l1), 3 ** (m - l2)
    vol = 1
    for a, b in zip(c1, c2):
        lo = max(a * f1, b * f2)
        hi = min((a + 1) * f1, (b + 1) * f2)
        if hi <= lo:
            return Fraction(0)
        vol *= hi - lo
    return Fraction(vol, 3 ** (m * d))


def cube_mass(tree: WeightTree, L: TriadicAddress) -> Fraction:
    """Exact ``w(L)`` by descent through the tree.

    At a node ``Q`` with ``L`` strictly inside it, the mass is the overlap with
    ``J(Q)`` times ``alpha_k`` plus the masses of the children meeting ``L``;
    a child contained in ``L`` contributes its whole mass
    ``node_density(k+1) |Q'|``.

    Raises
    ------
    TooDeep
        Under drop-tail truncation for levels finer than ``N (K+1)``.
    """
    d, N, K = tree.d, tree.N, tree.K
    if L.dimension != d:
        raise ValueError("dimension mismatch")
    if L.level > N * (K + 1) and tree.params.truncation == DROP_TAIL:
        raise TooDeep(f"level {L.level} is finer than the drop-tail representation")
    if L.level == 0:
        return tree.total_mass
    k, i = 0, 0
    total = Fraction(0)
    while True:
        g = tree.gens[k]
        jc = _j_of(tuple(int(v) for v in g.coords[i]), tree.sigmas[int(g.branch[i])], N)
        total += tree.alpha[k] * _overlap_volume(L.level, L.coords, N * (k + 1), jc, d)
        child_level = N * (k + 1)
        leaf = k == K
        child_mass_density = tree.alpha[K] if leaf else tree.node_density(k + 1)
        if leaf and tree.params.truncation == DROP_TAIL:
            return total
        if L.level <= child_level:
            # children are inside L or disjoint from it
            f = 3 ** (child_level - L.level)
            kids = tree.child_coords(k, i)
            inside = np.all((kids // f) == np.asarray(L.coords, dtype=np.int64)[None, :], axis=1)
            total += int(inside.sum()) * child_mass_density * Fraction(1, 3 ** (child_level * d))
            return total
        anc = L.ancestor(child_level)
        idx = tree.child_index(k, i, anc.coords)
        if idx is None:
            return total
        if leaf:
            return total + child_mass_density * L.volume
        k, i = k + 1, idx


def density_at(tree: WeightTree, x: Sequence) -> Fraction:
    """``w(x)`` with boundary points assigned to the half-open cube ``[lo, lo+side)``."""
    xs = tuple(Fraction(v) for v in x)
    if any(not 0 <= v < 1 for v in xs):
        return Fraction(0)
    N, K = tree.N, tree.K
    k, i = 0, 0
    while True:
        g = tree.gens[k]
        jlevel = N * (k + 1)
        jc = _j_of(tuple(int(v) for v in g.coords[i]), tree.sigmas[int(g.branch[i])], N)
        here = TriadicAddress.containing(xs, jlevel)
        if here.coords == jc:
            return tree.alpha[k]
        idx = tree.child_index(k, i, here.coords)
        if idx is None:
            return Fraction(0)
        if k == K:
            return tree.alpha[K] if tree.params.truncation == LEAF_UNIFORM else Fraction(0)
        k, i = k + 1, idx


def i1_discrete(tree: WeightTree, node: TreeNode) -> float:
    """``I_1`` straight from its definition: the sum of
    ``K(c_Q, c_L) w(L)`` over all same-level triadic ``L != Q`` with nonzero
    mass, masses from :func:`cube_mass`.  Enumerates ``3^(N k d)`` cubes; meant
    as an oracle for small trees.
    """
    lvl = node.addr.level
    if lvl == 0:
        return 0.0
    n = 3**lvl
    if n**tree.d > 2_000_000:
        raise TooLarge("i1_discrete enumeration too large")
    total = 0.0
    cq = node.addr.center
    for coords in itertools.product(range(n), repeat=tree.d):
        if coords == node.addr.coords:
            continue
        L = TriadicAddress(lvl, coords)
        mass = cube_mass(tree, L)
        if mass == 0:
            continue
        total += kernel_value(tree.kernel, cq, L.center) * float(mass)
    return total


def support_cells(tree: WeightTree) -> Iterator[tuple[TriadicAddress, Fraction]]:
    """All constant-density cells: J-cubes with ``alpha_k`` and, under
    leaf-uniform truncation, the generation-``K+1`` tree cubes with ``alpha_K``."""
    for block in tree.support_blocks(merged=False):
        lvl = block["level"]
        for row in block["coords"]:
            yield TriadicAddress(lvl, tuple(int(v) for v in row)), block["density"]


# -- serialization ---------------------------------------------------------

FORMAT = "swl-tree"
VERSION = 1


def _frac(q: Fraction) -> list[str]:
    return [str(q.numerator), str(q.denominator)]


def _unfrac(obj) -> Fraction:
    try:
        return Fraction(int(obj[0]), int(obj[1]))
    except (TypeError, ValueError, IndexError, ZeroDivisionError) as exc:
        raise FormatError(f"bad rational {obj!r}") from exc


def to_document(tree: WeightTree) -> dict:
    p = tree.params
    header = {
        "format": FORMAT,
        "version": VERSION,
        "d": p.d,
        "N": p.N,
        "K": p.K,
        "kernel": p.kernel.id,
        "adjoint": p.adjoint,
        "cone_mode": p.resolved_cone_mode,
        "cones": tree.cones.to_json(),
        "truncation": p.truncation,
        "tie_break": p.tie_break,
        "A": tree.A,
    }
    return {
        "header": header,
        "a": _frac(tree.a),
        "alpha": [_frac(q) for q in tree.alpha],
        "patterns": {"+1": tree.patterns[1].tolist(), "-1": tree.patterns[-1].tolist()},
        "generations": [
            {
                "coords": g.coords.tolist(),
                "i1": g.i1.tolist(),
                "i1_abs": g.i1_abs.tolist(),
                "branch": g.branch.tolist(),
                "tie": g.tie.tolist(),
            }
            for g in tree.gens
        ],
    }


def serialize(tree: WeightTree) -> str:
    return json.dumps(to_document(tree), separators=(",", ":"))


def deserialize(text: str, expect: dict | None = None, max_support_cells: int | None = None,
                check: bool = True) -> WeightTree:
    """Load a tree document and re-validate its invariants.

    ``expect`` may pin header fields (e.g. ``{"d": 1, "N": 3}``); mismatches
    raise :class:`FormatError`, as do version errors and, with ``check``,
    invariant failures.  The stored ``alpha``, ``a`` and ``A`` are kept on
    the tree as ``stored`` for later validation.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not JSON: {exc}") from exc
    if not isinstance(doc, dict) or "header" not in doc:
        raise FormatError("missing header")
    h = doc["header"]
    if h.get("format") != FORMAT or h.get("version") != VERSION:
        raise FormatError(f"unsupported format {h.get('format')!r} version {h.get('version')!r}")
    for key, val in (expect or {}).items():
        if h.get(key) != val:
            raise FormatError(f"header field {key}={h.get(key)!r}, expected {val!r}")
    try:
        kernel = parse_kernel(h["kernel"])
        params = BuildParams(
            N=int(h["N"]),
            d=int(h["d"]),
            K=int(h["K"]),
            kernel=kernel,
            cones=ConeData.from_json(h["cones"]),
            adjoint=bool(h["adjoint"]),
            truncation=h["truncation"],
            tie_break=int(h["tie_break"]),
            cone_mode=h["cone_mode"],
            max_support_cells=max_support_cells,
            max_nodes=None,
        )
        patterns = {
            1: np.asarray(doc["patterns"]["+1"], dtype=np.int64).reshape(-1, params.d),
            -1: np.asarray(doc["patterns"]["-1"], dtype=np.int64).reshape(-1, params.d),
        }
        gens = [
            Generation(
                coords=np.asarray(g["coords"], dtype=np.int64).reshape(-1, params.d),
                i1=np.asarray(g["i1"], dtype=float),
                i1_abs=np.asarray(g["i1_abs"], dtype=float),
                branch=np.asarray(g["branch"], dtype=np.int8),
                tie=np.asarray(g["tie"], dtype=bool),
            )
            for g in doc["generations"]
        ]
        alpha = [_unfrac(q) for q in doc["alpha"]]
        a = _unfrac(doc["a"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed tree document: {exc}") from exc
    tree = WeightTree(params, params.cones, patterns, gens)
    tree.stored = {"alpha": alpha, "a": a, "A": h.get("A")}
    problems = validate(tree, alpha=alpha, a=a, A=h.get("A")) if check else []
    if problems:
        raise FormatError("invariant failure after load: " + "; ".join(problems))
    return tree


def validate(tree: WeightTree, alpha=None, a=None, A=None) -> list[str]:
    """Structural checks; returns a list of violated invariants (empty if fine)."""
    problems = []
    p = tree.params
    if len(tree.gens) != p.K + 1:
        problems.append(f"expected {p.K + 1} generations, found {len(tree.gens)}")
    if A is not None and A != tree.A:
        problems.append(f"header A={A} but pattern has {tree.A} children")
    if len(tree.patterns[1]) != len(tree.patterns[-1]):
        problems.append("branch patterns differ in size")
    if a is not None and a != tree.a:
        problems.append(f"a={a} differs from 3^(Nd)/(1+A)={tree.a}")
    if alpha is not None:
        if len(alpha) != p.K + 1:
            problems.append("alpha list has the wrong length")
        else:
            if alpha[0] != tree.a:
                problems.append("alpha_0 != a")
            for k in range(1, len(alpha)):
                if alpha[k] != tree.a * alpha[k - 1]:
                    problems.append(f"alpha_{k} != a * alpha_{k - 1}")
    if not tree.a > 1:
        problems.append("a <= 1")
    for k, g in enumerate(tree.gens):
        if len(g) != tree.A**k:
            problems.append(f"generation {k} has {len(g)} nodes, expected A^{k}={tree.A ** k}")
            continue
        if k > 0 and not np.array_equal(g.coords, tree.all_children(k - 1)):
            problems.append(f"generation {k} coordinates are not the children of generation {k - 1}")
        if np.any((g.branch != 1) & (g.branch != -1)):
            problems.append(f"generation {k} has an invalid branch value")
        bad = (~g.tie) & (np.sign(g.i1) != g.branch)
        if np.any(bad):
            problems.append(f"generation {k}: branch disagrees with the sign of I1 at {int(bad.sum())} nodes")
        ties_ok = g.tie | (np.abs(g.i1) > TIE_REL * g.i1_abs)
        if not np.all(ties_ok):
            problems.append(f"generation {k}: tie flags inconsistent with I1")
    if p.truncation == LEAF_UNIFORM and not problems and tree.total_mass != 1:
        problems.append(f"total mass {tree.total_mass} != 1")
    return problems
