# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels (direct kernel sums, tiered cell quadrature, run fields).

Mirrors ``_core_py`` exactly; see that module for the contracts.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, log, log1p, pow

cnp.import_array()

BACKEND = "cython"

cdef enum:
    MAXD = 3
    NTIERS = 5

ORDERS = (4, 8, 12, 24, 32)
THRESHOLDS = (8.0, 2.0, 0.5, 0.1)
NEAR_RATIO = 0.1

cdef int[NTIERS] _ORD = [4, 8, 12, 24, 32]
cdef double[4] _THR = [8.0, 2.0, 0.5, 0.1]

_nodes = []
_weights = []
for _n in ORDERS:
    _x, _w = np.polynomial.legendre.leggauss(_n)
    _nodes.append(np.ascontiguousarray(0.5 * (_x + 1.0)))
    _weights.append(np.ascontiguousarray(0.5 * _w))
_NODES = np.concatenate(_nodes)
_WEIGHTS = np.concatenate(_weights)
cdef double[::1] _NODES_V = _NODES
cdef double[::1] _WEIGHTS_V = _WEIGHTS
cdef int[NTIERS] _OFF
_o = 0
for _i in range(NTIERS):
    _OFF[_i] = _o
    _o += ORDERS[_i]


cdef inline double _omega(int family, int axis, double scale, double* u, int d) nogil:
    cdef double r2 = 0.0
    cdef int i
    for i in range(d):
        r2 += u[i] * u[i]
    if family == 0:
        return scale * u[axis] / sqrt(r2)
    elif family == 1:
        return scale * 2.0 * u[0] * u[1] / r2
    elif family == 2:
        return scale * (u[0] * u[0] - u[1] * u[1]) / r2
    return scale


cdef inline double _kernel(int family, int axis, double scale, double* u, int d) nogil:
    cdef double r2 = 0.0
    cdef int i
    for i in range(d):
        r2 += u[i] * u[i]
    cdef double om = _omega(family, axis, scale, u, d)
    if d == 1:
        return om / sqrt(r2)
    elif d == 2:
        return om / r2
    return om / (r2 * sqrt(r2))


def omega(int family, int axis, double scale, u):
    cdef double[:, ::1] uu = np.ascontiguousarray(np.atleast_2d(u), dtype=float)
    cdef Py_ssize_t n = uu.shape[0], i
    cdef int d = uu.shape[1]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _omega(family, axis, scale, &uu[i, 0], d)
    return out.reshape(np.shape(u)[:-1])


def pair_sum(int family, int axis, double scale, targets, sources, dens):
    cdef double[:, ::1] t = np.ascontiguousarray(targets, dtype=float)
    cdef double[:, ::1] s = np.ascontiguousarray(sources, dtype=float)
    cdef double[::1] w = np.ascontiguousarray(dens, dtype=float)
    cdef Py_ssize_t n = t.shape[0], m = s.shape[0], i, j
    cdef int d = t.shape[1] if n > 0 else (s.shape[1] if m > 0 else 1)
    out = np.zeros(n)
    out_abs = np.zeros(n)
    cdef double[::1] o = out
    cdef double[::1] oa = out_abs
    cdef double u[MAXD]
    cdef double acc, acc_abs, r2, k
    cdef int a
    with nogil:
        for i in range(n):
            acc = 0.0
            acc_abs = 0.0
            for j in range(m):
                r2 = 0.0
                for a in range(d):
                    u[a] = t[i, a] - s[j, a]
                    r2 += u[a] * u[a]
                if r2 == 0.0:
                    continue
                k = _kernel(family, axis, scale, u, d) * w[j]
                acc += k
                acc_abs += fabs(k)
            o[i] = acc
            oa[i] = acc_abs
    return out, out_abs


cdef inline double _rho(double q) nogil:
    cdef double t = 2.0 * q + 1.0
    return t + sqrt(t * t - 1.0)


def cells_potential(int family, int axis, double scale, lo, side, dens, group, int n_groups, int shift=0):
    cdef double[:, ::1] L = np.ascontiguousarray(lo, dtype=float)
    cdef double[::1] S = np.ascontiguousarray(side, dtype=float)
    cdef double[::1] D = np.ascontiguousarray(dens, dtype=float)
    cdef long long[::1] G = np.ascontiguousarray(group, dtype=np.int64)
    cdef Py_ssize_t m = L.shape[0], c
    cdef int d = L.shape[1] if m > 0 else 1
    sums = np.zeros(n_groups)
    errs = np.zeros(n_groups)
    near = np.zeros(m, dtype=np.uint8)
    cdef double[::1] SU = sums
    cdef double[::1] ER = errs
    cdef unsigned char[::1] NR = near
    cdef double u[MAXD]
    cdef int idx[MAXD]
    cdef double gap2, g, q, s, acc, wprod, bound, hi
    cdef int a, tier, n, off, npts, p, rem
    cdef double omax = fabs(scale)
    with nogil:
        for c in range(m):
            s = S[c]
            gap2 = 0.0
            for a in range(d):
                hi = L[c, a] + s
                g = L[c, a]
                if -hi > g:
                    g = -hi
                if g < 0.0:
                    g = 0.0
                gap2 += g * g
            q = sqrt(gap2) / s
            tier = -1
            for a in range(4):
                if q >= _THR[a]:
                    tier = a
                    break
            if tier < 0:
                NR[c] = 1
                continue
            if d == 1 and shift == 0:
                # exact: int_a^b Omega(sign(-y)) / |y| dy for a cell off the origin
                if L[c, 0] > 0.0:
                    u[0] = -1.0
                    acc = _omega(family, axis, scale, u, 1) * log1p(s / L[c, 0])
                else:
                    u[0] = 1.0
                    acc = _omega(family, axis, scale, u, 1) * log1p(s / -(L[c, 0] + s))
                SU[G[c]] += acc * D[c]
                ER[G[c]] += 4e-16 * fabs(acc * D[c])
                continue
            tier = tier + shift
            if tier > NTIERS - 1:
                tier = NTIERS - 1
            n = _ORD[tier]
            off = _OFF[tier]
            npts = 1
            for a in range(d):
                npts *= n
            acc = 0.0
            for p in range(npts):
                rem = p
                wprod = 1.0
                for a in range(d):
                    idx[a] = rem % n
                    rem = rem // n
                    # evaluation point at the origin: u = x - y = -y
                    u[a] = -(L[c, a] + s * _NODES_V[off + idx[a]])
                    wprod *= _WEIGHTS_V[off + idx[a]]
                acc += wprod * _kernel(family, axis, scale, u, d)
            wprod = 1.0
            for a in range(d):
                wprod *= s
            SU[G[c]] += acc * wprod * D[c]
            bound = fabs(D[c]) * omax * wprod / pow(sqrt(gap2), d)
            ER[G[c]] += bound * pow(_rho(q), -2.0 * n)
    return sums, errs, np.flatnonzero(near).astype(np.int64)


cdef double[7] _PSI_C = [1.0 / 12, -1.0 / 120, 1.0 / 252, -1.0 / 240, 1.0 / 132, -691.0 / 32760, 1.0 / 12]


cdef double _psi_large(double x) nogil:
    cdef double ix2 = 1.0 / (x * x), p = ix2, r = log(x) - 0.5 / x
    cdef int k
    for k in range(7):
        r -= _PSI_C[k] * p
        p *= ix2
    return r


cdef double _psi(double x) nogil:
    cdef double acc = 0.0
    while x < 12.0:
        acc -= 1.0 / x
        x += 1.0
    return acc + _psi_large(x)


cdef double _dpsi(double a, double b) nogil:
    cdef double ia2, ib2, pa, pb, r
    cdef int k
    if a < 12.0 or b < 12.0:
        return _psi(a) - _psi(b)
    r = log1p((a - b) / b) - (0.5 / a - 0.5 / b)
    ia2 = 1.0 / (a * a)
    ib2 = 1.0 / (b * b)
    pa = ia2
    pb = ib2
    for k in range(7):
        r -= _PSI_C[k] * (pa - pb)
        pa *= ia2
        pb *= ib2
    return r


def run_field_1d(t, run_lo, run_count, run_dens):
    cdef double[::1] T = np.ascontiguousarray(t, dtype=float)
    cdef double[::1] R = np.ascontiguousarray(run_lo, dtype=float)
    cdef double[::1] C = np.ascontiguousarray(run_count, dtype=float)
    cdef double[::1] W = np.ascontiguousarray(run_dens, dtype=float)
    cdef Py_ssize_t n = T.shape[0], r = R.shape[0], i, j
    out = np.zeros(n)
    cdef double[::1] O = out
    cdef double acc, w
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(r):
                w = T[i] - R[j] - 0.5
                if w > 0:
                    acc += W[j] * _dpsi(w + 1.0, w - C[j] + 1.0)
                else:
                    acc -= W[j] * _dpsi(C[j] - w, -w)
            O[i] = acc
    return out
