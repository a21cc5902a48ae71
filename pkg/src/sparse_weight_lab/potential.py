"""Bulk evaluation of ``sum_c dens_c int_c K(x, y) dy`` over many cells.

Geometry is kept in exact integers: a point ``x`` whose coordinates are odd
multiples of ``3^-L / 2`` is stored as ``X = 2 * 3^L * x``, and cells as
integer low corners and sides in the same units.  Offsets ``lo - X`` are
formed in int64 before conversion, and since ``int_c K(x, y) dy`` is invariant
under dilation no conversion back to physical units is ever needed.

Far cells go to the compiled tiered Gauss-Legendre kernel; cells within a
tenth of their side are split triadically, and the cell containing ``x`` is
handled by the principal-value face formula.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._accel import core
from .errors import SingularPoint, TooDeep
from .kernel import KernelSpec, cube_integral, pv_integral, pv_self_integral

__all__ = ["CellSet", "point_units", "integrate_cells", "brute_force_cells"]

_MAX_EXACT = 2**53


@dataclass
class CellSet:
    """Cells in doubled lattice units of level ``L``: ``lo`` (n, d) and
    ``side`` (n,) as int64, ``dens`` as float, plus the density index ``k``."""

    L: int
    lo: np.ndarray
    side: np.ndarray
    dens: np.ndarray
    k: np.ndarray

    @classmethod
    def from_blocks(cls, blocks, L: int) -> "CellSet":
        if 2 * 3**L >= _MAX_EXACT:
            raise TooDeep(f"lattice level {L} exceeds the exact float range")
        los, sides, dens, ks = [], [], [], []
        for b in blocks:
            f = 2 * 3 ** (L - b["level"])
            c = np.asarray(b["coords"], dtype=np.int64)
            los.append(c * f)
            sides.append(np.full(len(c), f, dtype=np.int64))
            dens.append(np.full(len(c), float(b["density"])))
            ks.append(np.full(len(c), b["k"], dtype=np.int16))
        return cls(L, np.vstack(los), np.concatenate(sides), np.concatenate(dens), np.concatenate(ks))

    @property
    def lo_float(self) -> np.ndarray:
        # exact: every coordinate is below 2^53
        if getattr(self, "_lo_f", None) is None:
            self._lo_f = self.lo.astype(float)
        return self._lo_f

    @property
    def side_float(self) -> np.ndarray:
        if getattr(self, "_side_f", None) is None:
            self._side_f = self.side.astype(float)
        return self._side_f

    def __len__(self) -> int:
        return len(self.side)

    def box_mask(self, level: int, coords: Sequence[int]) -> np.ndarray:
        """Cells contained in the triadic cube ``(level, coords)``."""
        f = 2 * 3 ** (self.L - level)
        qlo = np.asarray(coords, dtype=np.int64) * f
        inside = np.all(self.lo >= qlo[None, :], axis=1) & np.all(self.lo + self.side[:, None] <= (qlo + f)[None, :], axis=1)
        return inside

    def cell_mask(self, level: int, coords: Sequence[int]) -> np.ndarray:
        f = 2 * 3 ** (self.L - level)
        qlo = np.asarray(coords, dtype=np.int64) * f
        return (self.side == f) & np.all(self.lo == qlo[None, :], axis=1)


def point_units(x: Sequence, L: int) -> np.ndarray:
    """``2 * 3^L * x`` as int64; the point must be the center of a level-``L``
    triadic cube (odd integer in these units)."""
    out = []
    for v in x:
        q = Fraction(v) * 2 * 3**L
        if q.denominator != 1 or q.numerator % 2 == 0:
            raise ValueError(f"coordinate {v} is not a level-{L} cube center")
        out.append(int(q))
    return np.asarray(out, dtype=np.int64)


def _split(lo: np.ndarray, side: int) -> tuple[np.ndarray, int]:
    """Triadic children of boxes ``lo + [0, side]^d`` (side divisible by 3)."""
    d = lo.shape[1]
    s = side // 3
    offs = np.stack(np.meshgrid(*([np.arange(3)] * d), indexing="ij"), axis=-1).reshape(-1, d) * s
    return (lo[:, None, :] + offs[None, :, :]).reshape(-1, d), s


def _ball_fits(rel_lo: np.ndarray, side: int) -> bool:
    """``x`` (origin) inside the box with ``B(x, side/3)`` contained in it."""
    return bool(np.all(-3 * rel_lo >= side) and np.all(3 * (rel_lo + side) >= side))


def _strictly_inside(rel_lo, side) -> bool:
    return bool(np.all(rel_lo < 0) and np.all(rel_lo + side > 0))


def _closed_contains(rel_lo, side) -> bool:
    return bool(np.all(rel_lo <= 0) and np.all(rel_lo + side >= 0))


def _near(spec: KernelSpec, rel_lo: np.ndarray, side: int, shift: int) -> tuple[float, float]:
    """``int K(0, y) dy`` over one near cell (integer offsets, unit density)."""
    fam, axis, scale = spec.core_args()
    total, err = 0.0, 0.0
    stack = [(rel_lo.reshape(1, -1), int(side))]
    while stack:
        los, s = stack.pop()
        pending = []
        for row in los:
            if _closed_contains(row, s):
                if not _strictly_inside(row, s):
                    raise SingularPoint("evaluation point on the boundary of a support cell")
                if _ball_fits(row, s):
                    v, e = pv_integral(spec, np.zeros(len(row)), row.astype(float), float(s))
                    total += v
                    err += e
                    continue
            pending.append(row)
        if not pending:
            continue
        if s % 3:
            raise SingularPoint("cannot resolve a near cell at the finest lattice level")
        kids, ks = _split(np.asarray(pending), s)
        contains = np.all(kids <= 0, axis=1) & np.all(kids + ks >= 0, axis=1)
        far = kids[~contains]
        if len(far):
            sums, errs, near_idx = core.cells_potential(
                fam, axis, scale, far.astype(float), np.full(len(far), float(ks)), np.ones(len(far)),
                np.zeros(len(far), dtype=np.int64), 1, shift,
            )
            total += float(sums[0])
            err += float(errs[0])
            if len(near_idx):
                stack.append((far[near_idx], ks))
        if contains.any():
            stack.append((kids[contains], ks))
    return total, err


def integrate_cells(spec: KernelSpec, cells: CellSet, X: np.ndarray, group: np.ndarray | None = None,
                    n_groups: int = 1, shift: int = 0, select: np.ndarray | None = None):
    """Grouped sums of ``dens_c int_c K(x, y) dy``.

    Parameters
    ----------
    X : int64 array
        The point in the doubled lattice units of ``cells``.
    group : int array, optional
        Group of each cell (default all zero).
    select : bool or index array, optional
        Restrict to a subset of cells.

    Returns
    -------
    sums, errs : ndarray
        Per-group values and accumulated a-priori quadrature error bounds.
    """
    lo, side, dens = cells.lo_float, cells.side_float, cells.dens
    if group is None:
        group = np.zeros(len(side), dtype=np.int64)
    if select is not None:
        lo, side, dens, group = lo[select], side[select], dens[select], group[select]
    rel = lo - X.astype(float)[None, :]
    fam, axis, scale = spec.core_args()
    sums, errs, near = core.cells_potential(fam, axis, scale, rel, side, dens, group, n_groups, shift)
    for c in near:
        v, e = _near(spec, rel[c].astype(np.int64), int(side[c]), shift)
        sums[group[c]] += dens[c] * v
        errs[group[c]] += abs(dens[c]) * e
    return sums, errs


def brute_force_cells(spec: KernelSpec, cells: CellSet, X: np.ndarray, rel_tol: float = 1e-10):
    """Oracle sum over all cells without grouping or tree structure.

    Far cells use the compiled rule one order tier higher than the
    decomposition uses; near cells are split triadically until they are at
    least a tenth of their side away and then integrated adaptively by
    :func:`cube_integral`; the cell holding ``x`` uses :func:`pv_self_integral`.
    """
    rel = cells.lo - X[None, :]
    fam, axis, scale = spec.core_args()
    group = np.zeros(len(cells), dtype=np.int64)
    sums, errs, near = core.cells_potential(fam, axis, scale, rel.astype(float), cells.side.astype(float), cells.dens, group, 1, 1)
    total, err = float(sums[0]), float(errs[0])
    d = rel.shape[1]
    for c in near:
        stack = [(rel[c], int(cells.side[c]))]
        while stack:
            row, s = stack.pop()
            if _closed_contains(row, s):
                if not _strictly_inside(row, s):
                    raise SingularPoint("evaluation point on the boundary of a support cell")
                if _ball_fits(row, s):
                    total += cells.dens[c] * pv_self_integral(spec, [0] * d, ([int(v) for v in row], s))
                    continue
            else:
                gap2 = float(np.sum(np.maximum(np.maximum(row, -(row + s)), 0).astype(float) ** 2))
                if 100.0 * gap2 >= float(s) ** 2:
                    v, e = cube_integral(spec, [0.0] * d, (row.astype(float), float(s)), rel_tol=rel_tol)
                    total += cells.dens[c] * v
                    err += abs(cells.dens[c]) * e
                    continue
            if s % 3:
                raise SingularPoint("cannot resolve a near cell at the finest lattice level")
            kids, ks = _split(row.reshape(1, -1), s)
            stack.extend((k, ks) for k in kids)
    return total, err
