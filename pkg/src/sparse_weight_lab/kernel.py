"""Convolution kernels ``K(x, y) = Omega(x - y) / |x - y|^d``.

Kernels come from a small registry of named analytic families (no expression
parsing).  The module verifies the mean-zero hypothesis, finds the sign cones
that drive child selection in the weight construction, and integrates ``K``
over cubes, including the principal-value case where the evaluation point
lies inside the cube.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _core_py
from .errors import BallNotContained, NoConeFound, SingularPoint, SingularityTooClose
from .triadic import TriadicAddress

__all__ = [
    "KernelSpec",
    "ConeData",
    "riesz_kernel",
    "parse_kernel",
    "verify_mean_zero",
    "find_cones",
    "kernel_value",
    "cube_integral",
    "pv_self_integral",
    "pv_integral",
    "smoothness_constant",
    "CAP_LADDER",
]

FAMILIES = {
    "riesz": _core_py.FAMILY_RIESZ,
    "sin2": _core_py.FAMILY_SIN2,
    "cos2": _core_py.FAMILY_COS2,
    "const": _core_py.FAMILY_CONST,
}

CAP_LADDER = (0.4, 0.3, 0.2, 0.1, 0.05)


def riesz_constant(d: int) -> float:
    """``c_d = Gamma((d+1)/2) / pi^((d+1)/2)``; ``1/pi`` for the Hilbert transform."""
    return math.gamma((d + 1) / 2) / math.pi ** ((d + 1) / 2)


@dataclass(frozen=True)
class KernelSpec:
    """A degree-zero angular part ``Omega`` on ``R^d``.

    ``scale`` is the signed prefactor actually applied; it equals
    ``normalization`` except for the adjoint of an odd kernel, where the sign
    flips.
    """

    name: str
    d: int
    family: int
    axis: int = 0
    normalization: float = 1.0
    scale: float = 1.0
    is_odd: bool = False
    smoothness_delta: float = 1.0
    eta: float = 1.0
    adjoint: bool = False

    def omega(self, u) -> np.ndarray:
        """Evaluate ``Omega`` at (not necessarily unit) nonzero vectors ``u``."""
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            u = u.reshape(1)
        return _core_py.omega(self.family, self.axis, self.scale, u)

    @property
    def sup_abs_omega(self) -> float:
        return abs(self.scale)

    @property
    def id(self) -> str:
        return self.name

    def adjoint_spec(self) -> "KernelSpec":
        """``K*(x, y) = K(y, x)``, i.e. ``Omega*(u) = Omega(-u)``."""
        scale = -self.scale if self.is_odd else self.scale
        return replace(self, scale=scale, adjoint=not self.adjoint)

    def core_args(self) -> tuple[int, int, float]:
        return self.family, self.axis, self.scale


def riesz_kernel(d: int, j: int) -> KernelSpec:
    """The ``j``-th Riesz transform in ``R^d`` (1-based ``j``); ``d=1`` is Hilbert."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if not 1 <= j <= d:
        raise ValueError(f"axis index must be in 1..{d}")
    c = riesz_constant(d)
    name = "hilbert" if d == 1 else f"riesz:d={d},j={j}"
    return KernelSpec(name, d, _core_py.FAMILY_RIESZ, j - 1, c, c, is_odd=True)


_ID = re.compile(r"^(?P<fam>[a-z0-9]+)(?::(?P<args>[a-z0-9=,\s]*))?$")


def parse_kernel(ident: str) -> KernelSpec:
    """Look up a registry id such as ``hilbert``, ``riesz:d=2,j=1``, ``sin2``.

    ``sin2`` and ``cos2`` are the planar angular parts ``sin 2theta`` and
    ``cos 2theta`` normalized by ``1/(2 pi)``; ``const`` (optionally
    ``const:d=2``) is the constant kernel, which fails the mean-zero test.
    """
    m = _ID.match(ident.strip().lower())
    if not m:
        raise ValueError(f"malformed kernel id {ident!r}")
    fam = m.group("fam")
    args = {}
    if m.group("args"):
        for part in m.group("args").split(","):
            key, _, val = part.strip().partition("=")
            if not val:
                raise ValueError(f"malformed kernel argument {part!r} in {ident!r}")
            args[key] = int(val)
    if fam == "hilbert":
        return riesz_kernel(1, 1)
    if fam == "riesz":
        unknown = set(args) - {"d", "j"}
        if unknown:
            raise ValueError(f"unknown riesz arguments {sorted(unknown)}")
        return riesz_kernel(args.get("d", 1), args.get("j", 1))
    if fam in ("sin2", "cos2"):
        if args.get("d", 2) != 2:
            raise ValueError(f"{fam} is only defined in the plane")
        c = 1.0 / (2.0 * math.pi)
        return KernelSpec(fam, 2, FAMILIES[fam], 0, c, c, is_odd=False)
    if fam == "const":
        d = args.get("d", 1)
        return KernelSpec(f"const:d={d}" if d != 1 else "const", d, FAMILIES["const"], 0, 1.0, 1.0)
    raise ValueError(f"unknown kernel {ident!r}")


@dataclass(frozen=True)
class ConeData:
    """Sign cones of ``Omega``: ``Omega > lam`` on the cap ``B(z_plus, r)`` and
    ``Omega < -lam`` on ``B(z_minus, r)``, with ``z_plus = tau z_minus``.

    ``tau`` is stored as its diagonal.
    """

    z_plus: tuple[float, ...]
    z_minus: tuple[float, ...]
    r: float
    lam: float
    tau: tuple[int, ...]
    extras: dict = field(default_factory=dict, compare=False)

    def z(self, branch: int) -> np.ndarray:
        return np.array(self.z_plus if branch > 0 else self.z_minus)

    def sigma(self, branch: int) -> tuple[int, ...]:
        """Vertex selector for a branch: the sign pattern of ``z_branch``.

        Children are taken in the cone with axis ``-z_branch`` at that vertex,
        so that ``v - c_R`` points into the ``branch`` cone of ``Omega``.
        """
        return tuple(1 if zi > 0 else -1 for zi in self.z(branch))

    def child_axis(self, branch: int) -> np.ndarray:
        return -self.z(branch)

    def to_json(self) -> dict:
        return {
            "z_plus": list(self.z_plus),
            "z_minus": list(self.z_minus),
            "r": self.r,
            "lambda": self.lam,
            "tau": list(self.tau),
        }

    @classmethod
    def from_json(cls, obj) -> "ConeData":
        return cls(
            tuple(float(v) for v in obj["z_plus"]),
            tuple(float(v) for v in obj["z_minus"]),
            float(obj["r"]),
            float(obj["lambda"]),
            tuple(int(v) for v in obj["tau"]),
        )


def _sphere_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights (summing to 1) for averaging over ``S^{d-1}``."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if d == 2:
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(n, 1.0 / n)
    if d == 3:
        x, w = np.polynomial.legendre.leggauss(n // 2)
        phi = 2 * np.pi * (np.arange(n) + 0.5) / n
        ct, ph = np.meshgrid(x, phi, indexing="ij")
        st = np.sqrt(1 - ct**2)
        pts = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
        wts = np.repeat(w / 2.0, n) / n
        return pts, wts
    raise ValueError("sphere quadrature is implemented for d <= 3")


def verify_mean_zero(spec: KernelSpec, n: int = 1024) -> float:
    """``|average of Omega over S^{d-1}|`` by a composite rule.

    The rule is exact for trigonometric polynomials of degree below ``n`` in
    the plane; callers compare the residual against their tolerance.
    """
    pts, wts = _sphere_rule(spec.d, n)
    return abs(float(np.dot(spec.omega(pts), wts)))


def _sphere_grid(d: int, m: int) -> np.ndarray:
    """Normalized lattice points on the boundary of ``[-m, m]^d``.

    Contains the coordinate axes and all diagonals ``(+-1, ..., +-1)/sqrt(d)``.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]])
    g = np.stack(np.meshgrid(*([np.arange(-m, m + 1)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    g = g[np.abs(g).max(axis=1) == m].astype(float)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _cap_sample(z: np.ndarray, r: float, fine: np.ndarray) -> np.ndarray:
    if len(z) == 1:
        return z.reshape(1, 1)
    inside = np.linalg.norm(fine - z, axis=1) < r
    return np.vstack([z[None, :], fine[inside]])


def _cap_margin(spec, z, r, fine, sign):
    vals = sign * spec.omega(_cap_sample(z, r, fine))
    return float(vals.min())


def find_cones(spec: KernelSpec, grid_resolution: int = 360) -> ConeData:
    """Locate sign cones ``z_plus``, ``z_minus = tau z_plus`` of ``Omega``.

    Candidate directions are the normalized boundary points of the cube
    ``[-m, m]^d`` with ``m = grid_resolution // 8`` (so ``grid_resolution``
    counts the planar grid points), restricted to ``|z_i| >= 0.1/sqrt(d)``.
    The score of a candidate is ``min(Omega(z), -Omega(tau z)) * min_i |z_i|``:
    sign strength balanced against distance from the coordinate hyperplanes,
    which is what lets a fixed triadic grid resolve the cone.  Odd kernels use
    ``tau = -I``; other kernels try every nontrivial diagonal sign flip.
    Exact score ties go to the lexicographically largest ``z``.

    The cap radius is the first rung of :data:`CAP_LADDER` on which both caps
    keep their sign on a fine sample, and ``lam`` is half the smaller cap
    minimum of ``|Omega|``.

    Raises
    ------
    NoConeFound
        If no admissible pair exists on the grid.
    """
    d = spec.d
    if grid_resolution < 8:
        raise ValueError("grid_resolution must be at least 8")
    m = max(1, grid_resolution // 8)
    grid = _sphere_grid(d, m)
    grid = grid[np.abs(grid).min(axis=1) >= 0.1 / math.sqrt(d) - 1e-15]
    fine = _sphere_grid(d, 4 * m) if d > 1 else None
    if spec.is_odd:
        taus = [(-1,) * d]
    else:
        taus = [t for t in itertools.product((1, -1), repeat=d) if any(s < 0 for s in t)]
    best = None
    for tau in taus:
        t = np.array(tau, dtype=float)
        vp = spec.omega(grid)
        vm = spec.omega(grid * t)
        score = np.minimum(vp, -vm) * np.abs(grid).min(axis=1)
        ok = (vp > 0) & (vm < 0)
        if not ok.any():
            continue
        score = np.where(ok, np.round(score, 12), -np.inf)
        top = score.max()
        cands = [tuple(row) for row in grid[score == top]]
        z = max(cands)
        if best is None or top > best[0] or (top == best[0] and z > best[1]):
            best = (top, z, tau)
    if best is None:
        raise NoConeFound(f"no sign-changing cone pair for kernel {spec.name!r} on the grid")
    _, z, tau = best
    zp = np.array(z)
    zm = zp * np.array(tau)
    for r in CAP_LADDER:
        mp = _cap_margin(spec, zp, r, fine, +1.0)
        mm = _cap_margin(spec, zm, r, fine, -1.0)
        if mp > 0 and mm > 0:
            return ConeData(tuple(map(float, zp)), tuple(map(float, zm)), r, 0.5 * min(mp, mm), tuple(tau))
    raise NoConeFound(f"no cap radius in {CAP_LADDER} keeps the sign of {spec.name!r}")


def kernel_value(spec: KernelSpec, x, y) -> float:
    """``K(x, y) = Omega(x - y) |x - y|^-d``."""
    u = np.asarray([float(a) - float(b) for a, b in zip(_seq(x), _seq(y))])
    r = float(np.linalg.norm(u))
    if r == 0.0:
        raise SingularPoint("kernel evaluated on the diagonal")
    return float(spec.omega(u)) / r**spec.d


def _seq(x) -> tuple:
    if isinstance(x, (int, float, Fraction, np.floating, np.integer)):
        return (x,)
    return tuple(x)


def _box(cube) -> tuple[np.ndarray, float]:
    """``(low corner, side)`` as floats from an address or a ``(lo, side)`` pair."""
    if isinstance(cube, TriadicAddress):
        return np.array([float(v) for v in cube.low]), float(cube.side)
    lo, side = cube
    return np.array([float(v) for v in _seq(lo)]), float(side)


def _box_exact(cube) -> tuple[tuple[Fraction, ...], Fraction]:
    if isinstance(cube, TriadicAddress):
        return cube.low, cube.side
    lo, side = cube
    return tuple(Fraction(v) for v in _seq(lo)), Fraction(side)


_GL8 = np.polynomial.legendre.leggauss(8)


def _tensor_rule(d: int, n_x: np.ndarray, n_w: np.ndarray):
    nodes = 0.5 * (n_x + 1.0)
    wts = 0.5 * n_w
    pts = np.stack(np.meshgrid(*([nodes] * d), indexing="ij"), axis=-1).reshape(-1, d)
    w = np.ones(len(pts))
    for ax in np.meshgrid(*([wts] * d), indexing="ij"):
        w = w * ax.reshape(-1)
    return pts, w


def _gl_boxes(spec, lows, side, rule):
    """GL approximations of ``int K(0, y) dy`` over boxes ``lows + [0, side]^d``."""
    pts, w = rule
    y = lows[:, None, :] + side * pts[None, :, :]
    u = -y
    r2 = np.einsum("...i,...i->...", u, u)
    k = spec.omega(u) / r2 ** (spec.d / 2.0)
    return (k * w).sum(axis=1) * side**spec.d, (np.abs(k) * w).sum(axis=1) * side**spec.d


def cube_integral(spec: KernelSpec, x, cube, rel_tol: float = 1e-10, max_depth: int = 40):
    """``int_cube K(x, y) dy`` for ``x`` at distance ``>= side/10`` from the cube.

    Adaptive tensor Gauss-Legendre (order 8) with dyadic subdivision: a box is
    accepted when its children agree with it to ``rel_tol`` of the size scale
    ``int |K|``, which concentrates refinement on the faces nearest ``x``.

    Returns
    -------
    value, error : float
        The integral and the sum of accepted local differences.

    Raises
    ------
    SingularityTooClose
        If ``x`` is closer to the cube than a tenth of its side.
    """
    lo_e, side_e = _box_exact(cube)
    xe = tuple(Fraction(v) for v in _seq(x))
    if len(xe) != spec.d or len(lo_e) != spec.d:
        raise ValueError("dimension mismatch between point, cube and kernel")
    gap2 = sum(max(l - xi, xi - l - side_e, Fraction(0)) ** 2 for l, xi in zip(lo_e, xe))
    if gap2 * 100 < side_e * side_e:
        raise SingularityTooClose("point within side/10 of the cube; use the principal-value routine")
    d = spec.d
    # translate so x is the origin; work in units of the side
    lows = np.array([[float((l - xi) / side_e) for l, xi in zip(lo_e, xe)]])
    rule = _tensor_rule(d, *_GL8)
    coarse, coarse_abs = _gl_boxes(spec, lows, 1.0, rule)
    scale = max(float(coarse_abs[0]), 1e-300)
    tol = rel_tol * scale
    corners = np.array(list(itertools.product((0.0, 0.5), repeat=d)))
    total, err = 0.0, 0.0
    side = 1.0
    vol_parent = 1.0
    for depth in range(max_depth):
        kids = (lows[:, None, :] + side * corners[None, :, :]).reshape(-1, d)
        fine, _ = _gl_boxes(spec, kids, side / 2, rule)
        fine = fine.reshape(len(lows), -1).sum(axis=1)
        diff = np.abs(fine - coarse)
        budget = tol * vol_parent
        done = diff <= budget
        total += float(fine[done].sum())
        err += float(diff[done].sum())
        if done.all():
            break
        keep = ~done
        lows = kids.reshape(len(lows), -1, d)[keep].reshape(-1, d)
        coarse_all, _ = _gl_boxes(spec, lows, side / 2, rule)
        coarse = coarse_all
        side /= 2
        vol_parent = side**d
    else:
        total += float(fine[~done].sum())
        err += float(diff[~done].sum())
    return total, err


_FACE_GL = np.polynomial.legendre.leggauss(24)
_FACE_GL_CHECK = np.polynomial.legendre.leggauss(32)


def _face_nodes(a: float, b: float, foot: float, rule, panels: int = 2):
    """Composite GL nodes on ``[a, b]`` with a break at ``foot`` when interior."""
    cuts = [a, b]
    if a < foot < b:
        cuts = [a, foot, b]
    xs, ws = [], []
    gx, gw = rule
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        edges = np.linspace(lo, hi, panels + 1)
        for p0, p1 in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (p1 - p0) * gx + 0.5 * (p1 + p0))
            ws.append(0.5 * (p1 - p0) * gw)
    return np.concatenate(xs), np.concatenate(ws)


def _pv_faces(spec, x, lo, side, rho, rule):
    d = spec.d
    hi = lo + side
    total = 0.0
    for axis in range(d):
        for end in (lo[axis], hi[axis]):
            h = abs(end - x[axis])
            others = [i for i in range(d) if i != axis]
            grids = [_face_nodes(lo[i], hi[i], x[i], rule) for i in others]
            pts = np.stack(np.meshgrid(*[g[0] for g in grids], indexing="ij"), axis=-1).reshape(-1, d - 1)
            w = np.ones(len(pts))
            for ax in np.meshgrid(*[g[1] for g in grids], indexing="ij"):
                w = w * ax.reshape(-1)
            p = np.empty((len(pts), d))
            p[:, others] = pts
            p[:, axis] = end
            u = x[None, :] - p
            r = np.linalg.norm(u, axis=1)
            vals = spec.omega(u) * np.log(r / rho) * h / r**d
            total += float(np.dot(vals, w))
    return total


def pv_integral(spec: KernelSpec, x, lo, side) -> tuple[float, float]:
    """Principal value of ``int_cube K(x, y) dy`` for ``x`` inside the open cube.

    In polar coordinates about ``x`` the mean-zero property removes the
    singular part, leaving ``int_S Omega(-theta) log(R(theta)/rho) dtheta``
    with ``R`` the exit distance.  Writing the sphere as the union of the cube
    faces seen from ``x`` turns this into smooth face integrals; in one
    dimension it is ``c log((x - a) / (b - x))``.

    Returns ``(value, error estimate)``.
    """
    x = np.asarray([float(v) for v in _seq(x)])
    lo = np.asarray([float(v) for v in _seq(lo)])
    side = float(side)
    if np.any(x <= lo) or np.any(x >= lo + side):
        raise SingularPoint("principal value needs the point in the open cube")
    if spec.d == 1:
        left = float(spec.omega(np.array([[1.0]]))[0])
        right = float(spec.omega(np.array([[-1.0]]))[0])
        return left * math.log(x[0] - lo[0]) + right * math.log(lo[0] + side - x[0]), 0.0
    rho = side / 3.0
    v1 = _pv_faces(spec, x, lo, side, rho, _FACE_GL)
    v2 = _pv_faces(spec, x, lo, side, rho, _FACE_GL_CHECK)
    return v2, abs(v2 - v1)


def pv_self_integral(spec: KernelSpec, x, cube) -> float:
    """``int_{cube \\ B(x, side/3)} K(x, y) dy``, equal to the principal value
    over the cube since ``Omega`` has mean zero on every sphere about ``x``.

    Raises
    ------
    BallNotContained
        If the ball ``B(x, side/3)`` leaves the cube, i.e. ``x`` is outside
        the closed middle child.
    """
    lo_e, side_e = _box_exact(cube)
    xe = tuple(Fraction(v) for v in _seq(x))
    rho = side_e / 3
    for l, xi in zip(lo_e, xe):
        if xi - l < rho or l + side_e - xi < rho:
            raise BallNotContained(f"ball of radius {rho} about {tuple(map(str, xe))} leaves the cube")
    value, _ = pv_integral(spec, [float(v) for v in xe], [float(v) for v in lo_e], float(side_e))
    return value


def smoothness_constant(spec: KernelSpec, samples: int = 4000, seed: int = 0) -> float:
    """Largest sampled ``|K(x,y) - K(x,y')| |x-y|^(d+delta) / |y-y'|^delta``
    over triples with ``|x - y| > 2 |y - y'|``.
    """
    rng = np.random.default_rng(seed)
    d, delta = spec.d, spec.smoothness_delta
    y = rng.normal(size=(samples, d))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    # x at the origin, |x - y| = 1; perturbation strictly below 1/2
    t = rng.uniform(0.0, 0.5, size=samples) * (1 - 1e-9)
    dirs = rng.normal(size=(samples, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    yb = y + t[:, None] * dirs
    k1 = spec.omega(-y) / np.linalg.norm(y, axis=1) ** d
    k2 = spec.omega(-yb) / np.linalg.norm(yb, axis=1) ** d
    ratio = np.abs(k1 - k2) / np.maximum(t, 1e-300) ** delta
    return float(ratio.max())
