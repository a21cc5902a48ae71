from fractions import Fraction as F
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import tree_for
from sparse_weight_lab import BuildParams, build, parse_kernel
from sparse_weight_lab.harness import (
    HarnessParams,
    HumpStats,
    calibrate_cross_hump,
    cross_hump_bound,
    dual_form_note,
    f_field,
    hump_gliding_series,
    hump_stats,
    lambda_sweep,
    local_a1_check,
    reverse_holder_series,
    two_weight_ratio,
    weak_type_ratio,
)

H = parse_kernel("hilbert")


def _adj(N, K=1):
    return build(BuildParams(N, 1, K, H, adjoint=True, max_support_cells=None))


@pytest.mark.parametrize("kw", [dict(p=1.0), dict(eps=0.4), dict(eps=1.0), dict(N0=1), dict(N0=5, N_max=4),
                                dict(s=3), dict(z=(1, 1), d=2), dict(z=(2,))])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        HarnessParams(**kw)


def test_params_defaults():
    hp = HarnessParams(d=2)
    assert hp.z == (1, 0) and hp.p_conj == 2.0


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0.01, 3)), min_size=1, max_size=30))
def test_lambda_sweep_matches_brute_force(pairs):
    v = np.array([a for a, _ in pairs])
    m = np.array([b for _, b in pairs])
    sup, lam0, _ = lambda_sweep(v, m)
    brute = max(abs(t) * m[np.abs(v) >= abs(t)].sum() for t in v)
    assert sup == pytest.approx(brute, rel=1e-12)
    assert lam0 * m[np.abs(v) >= lam0].sum() == pytest.approx(sup, rel=1e-12)


def test_weak_type_positive_and_growing():
    rs = [weak_type_ratio(1, N, H) for N in (3, 4, 5)]
    assert all(r.adjoint_energy > 0 for r in rs)
    assert rs[0].ratio < rs[1].ratio < rs[2].ratio


def test_weak_type_mw_modes_within_bracket():
    t = _adj(4)
    a = weak_type_ratio(1, 4, H, tree=t, mw_mode="w")
    b = weak_type_ratio(1, 4, H, tree=t, mw_mode="upper")
    # Mw = 9 w scales f by 1/9, the weak norm by 1/81 and the right side by 1/9
    assert b.ratio / a.ratio == pytest.approx(1 / 9, rel=1e-12)
    c = weak_type_ratio(1, 4, H, tree=t, mw_mode="lower")
    assert b.ratio / 9 <= c.ratio <= a.ratio * 9


def test_two_weight_rhs_identity_and_scaling():
    t = _adj(3)
    lhs, rhs = two_weight_ratio(t, H, p=2, mw_mode="w")
    ff = f_field(t, s=1, mw_mode="w")
    mask = ff.is_j
    assert rhs == pytest.approx(float(np.sum(np.abs(ff.f[mask]) ** 2 * ff.mass[mask])), rel=1e-12)
    lhs2, rhs2 = two_weight_ratio(t, H, p=2, mw_mode="w", weight_scale=7.0)
    assert lhs2 / rhs2 == pytest.approx(lhs / rhs, rel=1e-9)


def test_hump_series_b_is_cauchy_and_eps_ordering():
    stats = {N: hump_stats(tree_for(1, N, 1), 2.0) for N in (4, 5, 6)}
    s75 = hump_gliding_series(HarnessParams(eps=0.75), stats)
    s90 = hump_gliding_series(HarnessParams(eps=0.9), stats)
    assert s75["B_tail_bound"] < 1e-8
    diffs = np.diff(s75["B_bound_partials"])
    assert np.all(diffs > 0) and np.all(diffs[1:] < diffs[:-1])
    # a larger eps makes the reference series grow more slowly
    assert all(a > b for a, b in zip(s75["reference_partials"], s90["reference_partials"]))
    assert all(isinstance(v, HumpStats) for v in stats.values())


def test_hump_tail_bound_dominates_long_continuation():
    hp = HarnessParams(series_span=10)
    short = hump_gliding_series(hp, {4: 1.0})
    long = hump_gliding_series(HarnessParams(series_span=40), {4: 1.0})
    assert long["B_bound_partials"][-1] - short["B_bound_partials"][-1] <= short["B_tail_bound"]


def test_cross_hump_bounds():
    C = calibrate_cross_hump(1, H, 4)
    acts = {}
    for N, J in [(4, 5), (5, 4), (4, 6), (4, 7)]:
        act, bound = cross_hump_bound(1, N, J, H, C=C)
        assert act <= bound * (1 + 1e-12)
        acts[N, J] = act
    assert acts[4, 5] > acts[4, 6] > acts[4, 7]
    assert 1 / 10 < acts[4, 5] / acts[5, 4] < 10


def test_local_a1_bracket_and_monotone_corrections():
    trees = {N: tree_for(1, N, 1) for N in (3, 4, 5, 6)}
    r = local_a1_check(trees, samples=6)
    assert all(v["bracket_holds"] for v in r.values())
    corr = [r[N]["cross_hump_correction"] for N in (4, 5, 6)]
    r_hi = local_a1_check({N: trees[N] for N in (4, 5, 6)}, samples=6)
    assert r_hi[4]["cross_hump_correction"] <= r[3]["cross_hump_correction"]
    assert all(c < 1e-2 for c in corr)


def test_reverse_holder_example():
    partials, rho, div = reverse_holder_series(1, 3, 9, 1, 40)
    assert rho == F(243, 100) and div
    assert partials[-1] > 10**6
    assert all(b > a for a, b in zip(partials, partials[1:]))


def test_reverse_holder_eps_zero_converges_to_total_mass():
    partials, rho, div = reverse_holder_series(1, 3, 9, 0, 200)
    assert rho == F(9, 10) and not div
    assert float(partials[-1]) == pytest.approx(1.0, abs=1e-8)


def test_reverse_holder_rho_increases_with_n():
    rhos = [reverse_holder_series(1, N, 3 ** (N - 1), F(1, 2), 2)[1] for N in (2, 3, 4, 5)]
    assert all(b > a for a, b in zip(rhos, rhos[1:]))


def test_reverse_holder_irrational_exponent():
    partials, rho, div = reverse_holder_series(1, 3, 9, 0.7, 10)
    assert div == (float(rho) > 1)


def test_dual_form_note_bracket():
    trees = {N: tree_for(1, N, 1) for N in (3, 4)}
    rep = dual_form_note(2.0, trees)
    lo, hi = rep["bracket"]
    assert lo == pytest.approx(9.0**-2)
    assert rep["bracket_holds"]
    a, b = rep["pointwise_ratio_range"]
    assert lo <= a <= b <= hi
