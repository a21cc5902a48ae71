from fractions import Fraction as F
import math

import numpy as np
import pytest

from conftest import tree_for
from sparse_weight_lab import BuildParams, build, parse_kernel
from sparse_weight_lab.kernel import pv_self_integral
from sparse_weight_lab.singular import (
    RATIO_COLUMNS,
    annulus_diagnostics,
    brute_force_T,
    evaluate_breakdown,
    ii1_value,
    potential_at,
    ratio_report,
    sample_points,
    summarize_ratios,
)
from sparse_weight_lab.weight import DROP_TAIL

TREES = [(1, 2, 1), (1, 3, 2), (1, 4, 1), (2, 2, 2), (2, 3, 1)]


@pytest.mark.parametrize("d,N,K", TREES)
def test_sign_alignment_every_non_tie_node(d, N, K):
    t = tree_for(d, N, K)
    for k in range(K + 1):
        g = t.gens[k]
        for i in range(len(g)):
            if g.tie[i]:
                continue
            assert np.sign(ii1_value(t, t.node(k, i))) == np.sign(g.i1[i]) == g.branch[i]


@pytest.mark.parametrize("d,N,K", [(1, 2, 1), (1, 3, 1), (2, 2, 1)])
def test_breakdown_matches_brute_force(d, N, K):
    t = tree_for(d, N, K)
    rng = np.random.default_rng(5)
    for _ in range(20):
        k = int(rng.integers(0, K + 1))
        node = t.node(k, int(rng.integers(t.node_count(k))))
        pts = sample_points(node)
        x = pts[int(rng.integers(len(pts)))]
        b = evaluate_breakdown(t, node, x)
        assert b.total == pytest.approx(brute_force_T(t, x), abs=max(1e-6, 1e-3 * abs(b.total)))
        assert b.total == pytest.approx(b.I1 + b.I2 + b.II1 + b.II2 + b.III, rel=1e-12, abs=1e-12)
        assert abs(b.total) >= b.lower_bound() - 1e-12


def test_single_cell_weight_is_a_principal_value():
    t = build(BuildParams(2, 1, 0, parse_kernel("hilbert"), truncation=DROP_TAIL))
    j = t.node(0, 0).j_addr
    # a level-4 cell center in the middle third of J, off its center
    x = (j.low[0] + j.side * F(7, 18),)
    expect = float(t.alpha[0]) * pv_self_integral(t.kernel, x, j)
    assert brute_force_T(t, x) == pytest.approx(expect, rel=1e-10)
    # a lone cell is symmetric about its center, where an odd kernel gives zero
    assert abs(brute_force_T(t, j.center)) < 1e-12


def test_annulus_counts_full_mode():
    for d, N, expect in [(1, 3, [3, 6]), (2, 3, [9, 72]), (1, 4, [3, 6, 18])]:
        t = tree_for(d, N, 0)
        a = annulus_diagnostics(t, t.node(0, 0))
        assert a.counts == expect
        assert sum(a.counts) == t.A
        for i, c in zip(a.index, a.counts):
            if i >= 2:
                assert c == 3 ** (d * i) - 3 ** (d * (i - 1))


@pytest.mark.parametrize("d,N,K", [(1, 3, 1), (1, 4, 2), (2, 2, 1)])
def test_ii1_dominates_annulus_sum(d, N, K):
    t = tree_for(d, N, K)
    for k in range(K + 1):
        node = t.node(k, 0)
        a = annulus_diagnostics(t, node)
        v = abs(ii1_value(t, node))
        assert v >= t.cones.lam * a.inverse_distance_total
        if d == 1:
            # all children sit on one side of the vertex, so the bound is an identity with Omega = c
            assert v == pytest.approx(a.inverse_distance_total / math.pi, rel=1e-12)


def test_continuous_part_stays_bounded():
    worst = []
    for N in range(3, 7):
        rows = ratio_report(tree_for(1, N, 1), node_limit=8)
        worst.append(max(r["continuous"] for r in rows))
    assert max(worst) < 2.0
    assert max(worst) / min(worst) < 2.0


def test_ratio_report_schema_and_triangle():
    rows = ratio_report(tree_for(1, 3, 2), node_limit=4, threads=2)
    assert set(RATIO_COLUMNS) <= set(rows[0])
    for r in rows:
        cont = abs(r["I2"]) + abs(r["II2"]) + abs(r["III"])
        assert abs(r["total"]) >= abs(r["I1"] + r["II1"]) - cont - 1e-12
        assert r["ratio_over_N"] == pytest.approx(r["ratio"] / 3)
    s = summarize_ratios(rows)
    assert set(s["generations"]) == {0, 1, 2}
    assert s["min_ratio"] == min(r["ratio"] for r in rows)


def test_threads_do_not_change_results():
    t = tree_for(1, 3, 1)
    a = ratio_report(t, node_limit=4, threads=1)
    b = ratio_report(t, node_limit=4, threads=3)
    assert [r["total"] for r in a] == [r["total"] for r in b]


def test_potential_at_matches_breakdown():
    t = tree_for(1, 3, 1)
    node = t.node(1, 2)
    x = sample_points(node)[1]
    vals, errs = potential_at(t, [x])
    assert vals[0] == pytest.approx(evaluate_breakdown(t, node, x).total, rel=1e-9)
    assert errs[0] < 1e-8
