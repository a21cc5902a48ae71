"""Exact integer geometry of triadic cubes.

A triadic cube of level ``m`` in ``[0, 1]^d`` is addressed by integer
coordinates ``(k_1, ..., k_d)`` with ``0 <= k_i < 3**m``; its closure is
``prod [k_i 3^-m, (k_i + 1) 3^-m]``.  No floating point enters the geometry:
positions, distances and volumes are :class:`fractions.Fraction`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import EmptySelection, OutOfParent

__all__ = [
    "TriadicAddress",
    "Cone",
    "middle_child",
    "j_cube",
    "corner",
    "cone_children",
    "min_distance",
    "intersection_volume",
    "contains",
]


@dataclass(frozen=True, order=True)
class TriadicAddress:
    level: int
    coords: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        if len(self.coords) < 1:
            raise ValueError("dimension must be at least 1")
        n = 3**self.level
        for c in self.coords:
            if not 0 <= c < n:
                raise ValueError(f"coordinate {c} outside [0, 3^{self.level})")

    @classmethod
    def root(cls, d: int) -> "TriadicAddress":
        return cls(0, (0,) * d)

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @property
    def side(self) -> Fraction:
        return Fraction(1, 3**self.level)

    @property
    def volume(self) -> Fraction:
        return self.side**self.dimension

    @property
    def low(self) -> tuple[Fraction, ...]:
        s = self.side
        return tuple(c * s for c in self.coords)

    @property
    def high(self) -> tuple[Fraction, ...]:
        s = self.side
        return tuple((c + 1) * s for c in self.coords)

    @property
    def center(self) -> tuple[Fraction, ...]:
        s = self.side
        return tuple((2 * c + 1) * s / 2 for c in self.coords)

    def children(self) -> list["TriadicAddress"]:
        """The 3^d children one level down, in lexicographic order."""
        base = [3 * c for c in self.coords]
        return [
            TriadicAddress(self.level + 1, tuple(b + o for b, o in zip(base, off)))
            for off in itertools.product(range(3), repeat=self.dimension)
        ]

    def ancestor(self, level: int) -> "TriadicAddress":
        if level > self.level:
            raise ValueError("ancestor level must not exceed own level")
        f = 3 ** (self.level - level)
        return TriadicAddress(level, tuple(c // f for c in self.coords))

    def descendants(self, level: int) -> Iterator["TriadicAddress"]:
        f = 3 ** (level - self.level)
        ranges = [range(c * f, (c + 1) * f) for c in self.coords]
        for cs in itertools.product(*ranges):
            yield TriadicAddress(level, cs)

    def contains_point(self, x: Sequence) -> bool:
        """Half-open membership ``[low, high)`` per axis."""
        return all(lo <= Fraction(xi) < hi for lo, hi, xi in zip(self.low, self.high, x))

    def closed_contains_point(self, x: Sequence) -> bool:
        return all(lo <= Fraction(xi) <= hi for lo, hi, xi in zip(self.low, self.high, x))

    @classmethod
    def containing(cls, x: Sequence, level: int) -> "TriadicAddress":
        """The half-open level-``level`` cube containing the point ``x``."""
        n = 3**level
        coords = tuple(math.floor(Fraction(xi) * n) for xi in x)
        return cls(level, coords)

    def to_json(self) -> list:
        return [self.level, list(self.coords)]

    @classmethod
    def from_json(cls, obj) -> "TriadicAddress":
        return cls(int(obj[0]), tuple(int(c) for c in obj[1]))


@dataclass(frozen=True)
class Cone:
    """Open cone ``{apex + t u : t > 0, |u| = 1, |u - axis| < radius}``."""

    apex: tuple
    axis: tuple[float, ...]
    radius: float

    def __post_init__(self):
        norm = math.sqrt(sum(a * a for a in self.axis))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"cone axis must be a unit vector (norm {norm!r})")
        if not self.radius > 0:
            raise ValueError("cone radius must be positive")

    def contains(self, y: Sequence) -> bool:
        u = [float(Fraction(yi) - Fraction(ai)) for yi, ai in zip(y, self.apex)]
        return direction_in_cap(np.array(u), np.array(self.axis), self.radius)


def direction_in_cap(u: np.ndarray, axis: np.ndarray, radius: float) -> np.ndarray:
    """Open cap test ``|u/|u| - axis| < radius``; zero vectors are excluded.

    ``u`` may be a single vector or an ``(n, d)`` array.
    """
    u = np.asarray(u, dtype=float)
    norm = np.linalg.norm(u, axis=-1)
    safe = np.where(norm > 0, norm, 1.0)
    dist = np.linalg.norm(u / safe[..., None] - axis, axis=-1)
    return (norm > 0) & (dist < radius)


def middle_child(addr: TriadicAddress) -> TriadicAddress:
    return TriadicAddress(addr.level + 1, tuple(3 * c + 1 for c in addr.coords))


def corner(addr: TriadicAddress, sigma: Sequence[int]) -> tuple[Fraction, ...]:
    """The vertex of ``addr`` selected by the sign vector (+1 picks the high end)."""
    _check_sigma(sigma, addr.dimension)
    return tuple(h if s > 0 else lo for lo, h, s in zip(addr.low, addr.high, sigma))


def _check_sigma(sigma, d):
    if len(sigma) != d or any(s not in (-1, 1) for s in sigma):
        raise ValueError(f"sign vector must have {d} entries in {{-1, +1}}: {sigma!r}")


def j_cube(hatQ: TriadicAddress, sigma: Sequence[int], target_level: int) -> TriadicAddress:
    """Cube of side ``3^-target_level`` touching ``hatQ`` only at its sigma-corner.

    The cube sits diagonally outside ``hatQ``; it must stay inside the parent
    of ``hatQ`` or :class:`OutOfParent` is raised.
    """
    _check_sigma(sigma, hatQ.dimension)
    if target_level <= hatQ.level:
        raise ValueError("target_level must exceed the level of hatQ")
    f = 3 ** (target_level - hatQ.level)
    coords = []
    for c, s in zip(hatQ.coords, sigma):
        coords.append((c + 1) * f if s > 0 else c * f - 1)
    parent = hatQ.ancestor(hatQ.level - 1) if hatQ.level > 0 else None
    if parent is None:
        raise OutOfParent("hatQ has no parent cube")
    pf = 3 ** (target_level - parent.level)
    for c, p in zip(coords, parent.coords):
        if not p * pf <= c < (p + 1) * pf:
            raise OutOfParent(f"corner cube at level {target_level} leaves the parent of {hatQ}")
    return TriadicAddress(target_level, tuple(coords))


def cone_children(hatQ: TriadicAddress, v: Sequence, cone: Cone, child_level: int) -> list[TriadicAddress]:
    """Subcubes of ``hatQ`` at ``child_level`` whose centers lie in the open cone at ``v``."""
    if child_level < hatQ.level:
        raise ValueError("child_level must not be coarser than hatQ")
    if tuple(Fraction(a) for a in cone.apex) != tuple(Fraction(a) for a in v):
        raise ValueError("cone apex must equal v")
    offsets = cone_offsets(
        child_level - hatQ.level, hatQ.dimension, _vertex_sigma(hatQ, v), np.array(cone.axis), cone.radius
    )
    if len(offsets) == 0:
        raise EmptySelection(f"no child center of {hatQ} lies in the cone at {v}")
    f = 3 ** (child_level - hatQ.level)
    return [TriadicAddress(child_level, tuple(c * f + int(o) for c, o in zip(hatQ.coords, row))) for row in offsets]


def _vertex_sigma(hatQ: TriadicAddress, v: Sequence) -> tuple[int, ...]:
    sigma = []
    for lo, hi, vi in zip(hatQ.low, hatQ.high, v):
        vi = Fraction(vi)
        if vi == hi:
            sigma.append(1)
        elif vi == lo:
            sigma.append(-1)
        else:
            raise ValueError(f"{v} is not a vertex of {hatQ}")
    return tuple(sigma)


def cone_offsets(depth: int, d: int, sigma: Sequence[int], axis: np.ndarray, radius: float) -> np.ndarray:
    """Integer offsets (lexicographic) of the subcubes of a cube, ``depth``
    levels down, whose centers lie in the cap cone at the ``sigma`` vertex."""
    n = 3**depth
    grid = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    # doubled units keep the half-integer centers exact
    u2 = 2 * grid + 1 - np.where(np.asarray(sigma) > 0, 2 * n, 0)
    mask = direction_in_cap(u2.astype(float), np.asarray(axis, dtype=float), radius)
    return grid[mask]


def min_distance(a: TriadicAddress, b: TriadicAddress) -> tuple[Fraction, Fraction]:
    """Exact gap between two closed cubes: ``(L-infinity gap, squared L2 gap)``."""
    if a.dimension != b.dimension:
        raise ValueError("dimension mismatch")
    gaps = []
    for alo, ahi, blo, bhi in zip(a.low, a.high, b.low, b.high):
        gaps.append(max(blo - ahi, alo - bhi, Fraction(0)))
    return max(gaps), sum(g * g for g in gaps)


def intersection_volume(a: TriadicAddress, b: TriadicAddress) -> Fraction:
    vol = Fraction(1)
    for alo, ahi, blo, bhi in zip(a.low, a.high, b.low, b.high):
        w = min(ahi, bhi) - max(alo, blo)
        if w <= 0:
            return Fraction(0)
        vol *= w
    return vol


def contains(outer: TriadicAddress, inner: TriadicAddress) -> bool:
    if inner.level < outer.level:
        return False
    return inner.ancestor(outer.level) == outer
