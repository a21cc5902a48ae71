from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import tree_for
from sparse_weight_lab import BuildParams, build, parse_kernel
from sparse_weight_lab.errors import CertificateMissing, NotOnSupport, TooLarge
from sparse_weight_lab.maximal import (
    StepWeight,
    box_mass,
    certified_upper,
    locate_j,
    maximal_lower,
    step_maximal,
    sv_bound_check,
    verify_cube_bound,
    verify_separation,
)
from sparse_weight_lab.triadic import TriadicAddress as T
from sparse_weight_lab.weight import cube_mass, density_at, support_cells


def _certified(d, N, K):
    t = tree_for(d, N, K)
    for k in range(K + 1):
        assert verify_cube_bound(t, k).passed
    return t


# -- exact mass bound ---------------------------------------------------------

def test_cube_bound_d1_n2_k0():
    r = verify_cube_bound(tree_for(1, 2, 1), 0)
    assert (r.level, r.checked) == (2, 9)
    assert r.passed and r.equality_as_expected
    assert (r.equality_tree_cubes, r.equality_j_cubes, r.equality_other) == (3, 1, 0)


def test_cube_bound_d1_n3_k1():
    r = verify_cube_bound(tree_for(1, 3, 2), 1)
    assert r.checked == 729 and r.passed and r.equality_as_expected


def test_cube_bound_detects_doubled_density():
    t = build(BuildParams(2, 1, 1, parse_kernel("hilbert")))
    t.gens[1].coords[1] = t.gens[1].coords[0]
    r = verify_cube_bound(t, 0)
    assert not r.passed and len(r.violations) == 1


def test_cube_bound_guard():
    with pytest.raises(TooLarge):
        verify_cube_bound(tree_for(1, 3, 2), 2, max_cubes=1000)


def test_box_mass_matches_cube_mass():
    t = tree_for(1, 3, 1)
    rng = np.random.default_rng(1)
    for _ in range(50):
        lvl = int(rng.integers(1, 7))
        c = int(rng.integers(0, 3**lvl))
        assert box_mass(t, (c,), 1, lvl) == cube_mass(t, T(lvl, (c,)))


# -- upper certificate and lower search ---------------------------------------

@pytest.mark.parametrize("d,N,K", [(1, 3, 2), (2, 2, 1)])
def test_certified_upper_is_9d_density(d, N, K):
    t = _certified(d, N, K)
    for k in range(K + 1):
        x = t.node(k, 0).j_addr.center
        assert locate_j(t, x) == (k, 0)
        assert certified_upper(t, x) == 9**d * float(density_at(t, x)) == 9**d * float(t.alpha[k])


def test_certified_upper_errors():
    t = build(BuildParams(3, 1, 1, parse_kernel("hilbert")))
    x = t.node(0, 0).j_addr.center
    with pytest.raises(CertificateMissing):
        certified_upper(t, x)
    with pytest.raises(NotOnSupport):
        certified_upper(t, (F(1, 18),), require_certificate=False)


@pytest.mark.parametrize("d,N,K", [(1, 3, 2), (1, 4, 1), (2, 2, 1)])
def test_bracket_at_100_points(d, N, K):
    t = _certified(d, N, K)
    rng = np.random.default_rng(d * 100 + N)
    for _ in range(100):
        k = int(rng.integers(0, K + 1))
        j = t.node(k, int(rng.integers(t.node_count(k)))).j_addr
        x = tuple(lo + j.side * F(int(u), 729) for lo, u in zip(j.low, rng.integers(1, 729, d)))
        est = maximal_lower(t, x)
        dens = density_at(t, x)
        assert est.density_at_x == dens == t.alpha[k]
        assert float(dens) <= est.lower <= certified_upper(t, x)
        assert est.lower_exact >= dens


def _mass_float(cells, a, b):
    return sum(float(m) * max(0.0, min(b, float(c.high[0])) - max(a, float(c.low[0]))) for c, m in cells)


def test_structured_search_beats_random_intervals():
    t = tree_for(1, 2, 1)
    cells = list(support_cells(t))
    x = t.node(0, 0).j_addr.center
    xf = float(x[0])
    rng = np.random.default_rng(3)
    lo = xf - rng.random(100_000) ** 3
    hi = xf + rng.random(100_000) ** 3
    best = 0.0
    # exact masses by cumulative sums over the cells, an independent path from the package
    edges = sorted({float(c.low[0]) for c, _ in cells} | {float(c.high[0]) for c, _ in cells})
    dens = np.array([float(density_at(t, (F(a + b) / 2,))) for a, b in zip(edges, edges[1:])])
    e = np.array(edges)
    cum = np.concatenate([[0], np.cumsum(dens * np.diff(e))])

    def W(y):
        y = np.clip(y, e[0], e[-1])
        i = np.clip(np.searchsorted(e, y, side="right") - 1, 0, len(dens) - 1)
        return cum[i] + dens[i] * (y - e[i])

    best = float(np.max((W(hi) - W(lo)) / (hi - lo)))
    assert abs(_mass_float(cells, lo[0], hi[0]) - (W(hi[0]) - W(lo[0]))) < 1e-12
    est = maximal_lower(t, x)
    assert est.lower >= best - 1e-12
    assert est.lower >= float(t.alpha[0])


# -- separation ---------------------------------------------------------------

@pytest.mark.parametrize("d,N,K", [(1, 3, 2), (1, 4, 2), (2, 3, 1)])
def test_separation(d, N, K):
    r = verify_separation(tree_for(d, N, K))
    assert r.passed
    assert r.min_ratio == F(1, 3) - F(1, 3**N)


def test_separation_fails_at_n2():
    r = verify_separation(tree_for(1, 2, 2))
    assert not r.passed and r.min_ratio == F(2, 9)


# -- step weights -------------------------------------------------------------

def test_step_indicator_examples():
    v = StepWeight(1.0, np.array([1.0]))
    assert step_maximal(v, 2.0) == 0.5
    assert step_maximal(v, 0.3) == 1.0


def _exhaustive_1d(vals, h, x, refine=4):
    # all intervals with endpoints on a grid `refine` times finer than the cells
    n = len(vals)
    g = h / refine
    fine = np.repeat(vals, refine)
    span = max(n * refine, int(round(x / g)) + 1)
    dens = np.concatenate([fine, np.zeros(span - len(fine) + 1)])
    cum = np.concatenate([[0], np.cumsum(dens * g)])
    ix = int(round(x / g))
    best = 0.0
    for a in range(0, ix + 1):
        for b in range(max(ix, a + 1), len(cum)):
            best = max(best, (cum[b] - cum[a]) / ((b - a) * g))
    return best


@given(st.lists(st.integers(0, 5), min_size=1, max_size=10), st.data())
def test_step_maximal_matches_exhaustive(vals, data):
    vals = np.array(vals, float)
    n = len(vals)
    i = data.draw(st.integers(1, 4 * n - 1))
    x = i * 0.25
    if i % 4 == 0 and vals[i // 4 - 1] != vals[i // 4]:
        return  # at a breakpoint the value depends on the side convention
    assert step_maximal(StepWeight(1.0, vals), x) == pytest.approx(_exhaustive_1d(vals, 1.0, x), abs=1e-12)


def test_step_maximal_dominates_random_intervals():
    rng = np.random.default_rng(11)
    vals = rng.integers(0, 4, 12).astype(float)
    v = StepWeight(1 / 12, vals)
    e = np.arange(13) / 12
    cum = np.concatenate([[0], np.cumsum(vals / 12)])

    def W(y):
        i = np.clip(np.searchsorted(e, y, side="right") - 1, 0, 11)
        return cum[i] + vals[i] * (y - e[i])

    for x in rng.random(20):
        a = x - rng.random(10_000) * x
        b = x + rng.random(10_000) * (1 - x)
        assert step_maximal(v, x) >= float(np.max((W(b) - W(a)) / (b - a))) - 1e-12


def test_step_maximal_2d_bracket():
    rng = np.random.default_rng(2)
    vals = rng.integers(0, 3, (6, 6)).astype(float)
    v = StepWeight(1 / 6, vals)
    for p in rng.random((20, 2)):
        i, j = (p * 6).astype(int)
        m = step_maximal(v, p)
        assert vals[i, j] - 1e-12 <= m <= vals.max() + 1e-12


def test_step_weight_validation():
    with pytest.raises(ValueError):
        StepWeight(1.0, np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        StepWeight(1.0, np.zeros((2, 2, 2)))


def test_sv_identity_and_empty():
    v = StepWeight(0.1, np.array([0, 1, 3, 0, 2, 2, 0, 5, 1, 0], float))
    lhs, rhs = sv_bound_check(v, v.values > 0)
    assert lhs / rhs == 1.0
    assert sv_bound_check(v, np.zeros(10, bool)) == (0.0, 0.0)


@given(st.integers(0, 10_000))
def test_sv_ratio_finite(seed):
    rng = np.random.default_rng(seed)
    v = StepWeight(1 / 20, rng.integers(0, 4, 20).astype(float))
    E = rng.random(20) < 0.4
    lhs, rhs = sv_bound_check(v, E)
    if rhs == 0:
        assert lhs == 0 or not (E & (v.values > 0)).any()
    else:
        assert np.isfinite(lhs / rhs) and lhs > 0


@pytest.mark.parametrize("N,K", [(2, 1), (3, 1)])
def test_tree_maximal_d1_equals_step_weight_path(N, K):
    t = tree_for(1, N, K)
    L = N * (K + 1)
    n = 3**L
    vals = np.zeros(n)
    for c, m in support_cells(t):
        f = 3 ** (L - c.level)
        vals[c.coords[0] * f:(c.coords[0] + 1) * f] = float(m)
    v = StepWeight(1 / n, vals)
    rng = np.random.default_rng(N)
    for _ in range(30):
        i = int(rng.choice(np.flatnonzero(vals)))
        x = (F(3 * i + 1, 3 * n),)
        assert maximal_lower(t, x).lower == pytest.approx(step_maximal(v, float(x[0])), rel=1e-12)
