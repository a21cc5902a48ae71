"""Pure numpy implementation of the hot kernels.

Same signatures and semantics as the compiled ``_core`` extension; selected
automatically when the extension is unavailable (see ``_accel``).
"""
from __future__ import annotations

import numpy as np
from scipy.special import digamma

FAMILY_RIESZ = 0
FAMILY_SIN2 = 1
FAMILY_COS2 = 2
FAMILY_CONST = 3

# Gauss-Legendre orders per distance tier; a tier shift moves every cell up.
ORDERS = (4, 8, 12, 24, 32)
# tier i is used when gap/side >= THRESHOLDS[i]; below the last one a cell is "near"
THRESHOLDS = (8.0, 2.0, 0.5, 0.1)
NEAR_RATIO = 0.1

_CHUNK = 1 << 21

_GL = {n: np.polynomial.legendre.leggauss(n) for n in ORDERS}

BACKEND = "python"


def omega(family, axis, scale, u):
    """Evaluate the angular part at (not necessarily unit) vectors ``u``."""
    u = np.asarray(u, dtype=float)
    if family == FAMILY_RIESZ:
        r = np.sqrt(np.einsum("...i,...i->...", u, u))
        return scale * u[..., axis] / r
    if family == FAMILY_SIN2:
        r2 = np.einsum("...i,...i->...", u, u)
        return scale * 2.0 * u[..., 0] * u[..., 1] / r2
    if family == FAMILY_COS2:
        r2 = np.einsum("...i,...i->...", u, u)
        return scale * (u[..., 0] ** 2 - u[..., 1] ** 2) / r2
    if family == FAMILY_CONST:
        return np.full(u.shape[:-1], float(scale))
    raise ValueError(f"unknown kernel family {family}")


def _kernel(family, axis, scale, u):
    d = u.shape[-1]
    r2 = np.einsum("...i,...i->...", u, u)
    return omega(family, axis, scale, u) / r2 ** (d / 2.0)


def pair_sum(family, axis, scale, targets, sources, dens):
    """``out[i] = sum_j K(t_i - s_j) dens_j`` skipping exact coincidences.

    Returns ``(sum, abs_sum)``.
    """
    targets = np.ascontiguousarray(targets, dtype=float)
    sources = np.ascontiguousarray(sources, dtype=float)
    dens = np.ascontiguousarray(dens, dtype=float)
    n, m = len(targets), len(sources)
    out = np.zeros(n)
    out_abs = np.zeros(n)
    if n == 0 or m == 0:
        return out, out_abs
    step = max(1, _CHUNK // max(m, 1))
    for i0 in range(0, n, step):
        u = targets[i0 : i0 + step, None, :] - sources[None, :, :]
        r2 = np.einsum("...i,...i->...", u, u)
        zero = r2 == 0
        u = np.where(zero[..., None], 1.0, u)
        k = _kernel(family, axis, scale, u)
        k[zero] = 0.0
        k *= dens[None, :]
        out[i0 : i0 + step] = k.sum(axis=1)
        out_abs[i0 : i0 + step] = np.abs(k).sum(axis=1)
    return out, out_abs


def _tier_of(q, shift):
    tier = np.full(q.shape, -1, dtype=np.int64)
    for i in range(len(THRESHOLDS) - 1, -1, -1):
        tier[q >= THRESHOLDS[i]] = i
    tier = np.where(tier >= 0, np.minimum(tier + shift, len(ORDERS) - 1), -1)
    return tier


def _rho(q):
    t = 2.0 * q + 1.0
    return t + np.sqrt(t * t - 1.0)


def cells_potential(family, axis, scale, lo, side, dens, group, n_groups, shift=0):
    """Sum of ``dens_c * int_c K(0, y) dy`` over cells, evaluation point at the origin.

    Cells closer than ``NEAR_RATIO * side`` (or containing the origin) are not
    integrated; their indices are returned for the caller to handle.

    Returns ``(sums, errs, near_idx)`` where ``sums`` and ``errs`` have one
    entry per group.
    """
    lo = np.ascontiguousarray(lo, dtype=float)
    side = np.ascontiguousarray(side, dtype=float)
    dens = np.ascontiguousarray(dens, dtype=float)
    group = np.ascontiguousarray(group, dtype=np.int64)
    m, d = lo.shape
    sums = np.zeros(n_groups)
    errs = np.zeros(n_groups)
    if m == 0:
        return sums, errs, np.zeros(0, dtype=np.int64)
    hi = lo + side[:, None]
    gap_axes = np.maximum(np.maximum(lo, -hi), 0.0)
    gap = np.sqrt((gap_axes**2).sum(axis=1))
    q = gap / side
    tier = _tier_of(q, shift)
    near = np.flatnonzero(tier < 0)
    if d == 1 and shift == 0:
        # exact: int_a^b Omega(sign(-y)) / |y| dy for a cell off the origin
        far = tier >= 0
        a = lo[:, 0]
        right = a > 0
        om = np.where(right, float(omega(family, axis, scale, np.array([[-1.0]]))[0]),
                      float(omega(family, axis, scale, np.array([[1.0]]))[0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            ln = np.log1p(side / np.where(right, a, -(a + side)))
        vals = np.where(far, om * ln * dens, 0.0)
        sums += np.bincount(group, weights=vals, minlength=n_groups)
        errs += np.bincount(group, weights=4e-16 * np.abs(vals), minlength=n_groups)
        return sums, errs, near
    for t in range(len(ORDERS)):
        idx = np.flatnonzero(tier == t)
        if len(idx) == 0:
            continue
        nodes, weights = _GL[ORDERS[t]]
        # tensor rule on [0, 1]^d
        pts = np.stack(np.meshgrid(*([0.5 * (nodes + 1.0)] * d), indexing="ij"), axis=-1).reshape(-1, d)
        wts = np.ones(len(pts))
        for w_axis in np.meshgrid(*([0.5 * weights] * d), indexing="ij"):
            wts = wts * w_axis.reshape(-1)
        step = max(1, _CHUNK // len(pts))
        omax = _omega_max(family, scale)
        for i0 in range(0, len(idx), step):
            sel = idx[i0 : i0 + step]
            s = side[sel]
            y = lo[sel, None, :] + s[:, None, None] * pts[None, :, :]
            k = _kernel(family, axis, scale, -y)
            vals = (k * wts[None, :]).sum(axis=1) * s**d * dens[sel]
            np.add.at(sums, group[sel], vals)
            bound = np.abs(dens[sel]) * omax * s**d / np.maximum(gap[sel], 1e-300) ** d
            e = bound * _rho(q[sel]) ** (-2.0 * ORDERS[t])
            np.add.at(errs, group[sel], e)
    return sums, errs, near


def _omega_max(family, scale):
    return abs(scale)


def _dpsi(a, b):
    """``psi(a) - psi(b)`` for positive arrays, accurate when both are large."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast(a, b).shape)
    a, b = np.broadcast_arrays(a, b)
    big = np.minimum(a, b) >= 12.0
    if np.any(~big):
        out[~big] = digamma(a[~big]) - digamma(b[~big])
    if np.any(big):
        ab, bb = a[big], b[big]
        res = np.log1p((ab - bb) / bb) - (0.5 / ab - 0.5 / bb)
        ia2, ib2 = 1.0 / (ab * ab), 1.0 / (bb * bb)
        pa, pb = ia2.copy(), ib2.copy()
        for c in _PSI_COEFFS:
            res -= c * (pa - pb)
            pa *= ia2
            pb *= ib2
        out[big] = res
    return out


# psi(x) ~ ln x - 1/(2x) - sum_k B_2k / (2k x^2k)
_PSI_COEFFS = (1.0 / 12, -1.0 / 120, 1.0 / 252, -1.0 / 240, 1.0 / 132, -691.0 / 32760, 1.0 / 12)


def run_field_1d(t, run_lo, run_count, run_dens):
    """``sum_r dens_r * sum_{i < count_r} 1 / (t - run_lo_r - i - 1/2)``.

    Every target must lie outside every run (no coincidences).
    """
    t = np.asarray(t, dtype=float)
    run_lo = np.asarray(run_lo, dtype=float)
    run_count = np.asarray(run_count, dtype=float)
    run_dens = np.asarray(run_dens, dtype=float)
    out = np.zeros(len(t))
    if len(run_lo) == 0 or len(t) == 0:
        return out
    step = max(1, _CHUNK // len(run_lo))
    for i0 in range(0, len(t), step):
        w = t[i0 : i0 + step, None] - run_lo[None, :] - 0.5
        n = run_count[None, :]
        right = w > 0
        vals = np.empty(w.shape)
        vals[right] = _dpsi((w + 1.0)[right], (w - n + 1.0)[right])
        left = ~right
        vals[left] = -_dpsi((n - w)[left], (-w)[left])
        out[i0 : i0 + step] = (vals * run_dens[None, :]).sum(axis=1)
    return out
