"""Acceptance suite: one PASS/FAIL line per criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are written
to the terminal even when output is captured.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from sparse_weight_lab import BuildParams, build, parse_kernel
from sparse_weight_lab.harness import (
    HarnessParams,
    hump_gliding_series,
    hump_stats,
    reverse_holder_series,
    two_weight_ratio,
    weak_type_ratio,
)
from sparse_weight_lab.maximal import (
    StepWeight,
    certified_upper,
    maximal_lower,
    sv_bound_check,
    verify_cube_bound,
    verify_separation,
)
from sparse_weight_lab.singular import (
    brute_force_T,
    evaluate_breakdown,
    ii1_value,
    ratio_report,
    sample_points,
    summarize_ratios,
)
from sparse_weight_lab.weight import validate

from conftest import tree_for

HILBERT = parse_kernel("hilbert")
RIESZ2 = parse_kernel("riesz:d=2,j=1")


@pytest.fixture()
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


MASS_CASES = [(1, N, K) for N in (2, 3, 4) for K in (1, 2, 3)] + [(2, N, K) for N in (2, 3) for K in (1, 2)]


def test_c01_exact_mass(verdict):
    bad, slowest = [], 0.0
    for d, N, K in MASS_CASES:
        t0 = time.perf_counter()
        t = build(BuildParams(N, d, K, HILBERT if d == 1 else RIESZ2, max_support_cells=None))
        m = t.total_mass
        slowest = max(slowest, time.perf_counter() - t0)
        if not (isinstance(m, Fraction) and m == 1):
            bad.append((d, N, K, m))
    verdict(1, not bad and slowest < 60,
            f"total mass == 1 exactly in {len(MASS_CASES) - len(bad)}/{len(MASS_CASES)} cases, slowest {slowest:.1f}s")


def test_c02_uniform_children(verdict):
    bad = []
    for d, N, K in [(1, 2, 2), (1, 3, 2), (1, 4, 2), (2, 2, 2), (2, 3, 1)]:
        t = tree_for(d, N, K)
        counts = {len(t.child_coords(k, i)) for k in range(K) for i in range(t.node_count(k))}
        if t.A != 3 ** ((N - 1) * d) or counts != {t.A} or validate(t):
            bad.append((d, N, K, t.A, counts))
    verdict(2, not bad, f"A = 3^((N-1)d) at every node; mismatches {bad}")


def test_c03_cube_bound(verdict):
    runs, bad = 0, []
    cases = [(1, N, 3, 2) for N in (2, 3, 4)] + [(2, N, 2, 1) for N in (2, 3)]
    for d, N, K, kmax in cases:
        t = tree_for(d, N, K)
        for k in range(kmax + 1):
            rep = verify_cube_bound(t, k, max_cubes=10**7)
            runs += 1
            exact = rep.equality_tree_cubes == t.A ** (k + 1) and rep.equality_other == 0
            if not rep.passed or not rep.equality_as_expected or not exact:
                bad.append((d, N, k, len(rep.violations), rep.equality_tree_cubes, rep.equality_other))
    verdict(3, not bad, f"{runs} exhaustive runs, zero violations, equality on tree cubes (and J-cubes); failures {bad}")


def _bracket(tree, points, seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        k = int(rng.integers(tree.K + 1))
        node = tree.node(k, int(rng.integers(tree.node_count(k))))
        q = 3**6
        x = tuple(lo + node.j_addr.side * Fraction(int(u), q)
                  for lo, u in zip(node.j_addr.low, rng.integers(1, q, size=tree.d)))
        est = maximal_lower(tree, x)
        dens = float(est.density_at_x)
        if not dens <= est.lower <= certified_upper(tree, x) <= 9**tree.d * dens * (1 + 1e-12):
            return False, worst
        worst = max(worst, est.lower / dens)
    return True, worst


def test_c04_maximal_bracket_and_separation(verdict):
    details, ok = [], True
    for d, N, K in [(1, 3, 2), (1, 4, 2), (2, 2, 1), (2, 3, 1)]:
        t = tree_for(d, N, K)
        for k in range(K + 1):
            ok &= verify_cube_bound(t, k).passed
        good, worst = _bracket(t, 100, seed=N + 10 * d)
        ok &= good
        det = f"d={d} N={N}: max lower/w {worst:.3f}"
        if N >= 3:
            sep = verify_separation(t)
            ok &= sep.passed
            det += f", min gap/side {float(sep.min_ratio):.4f}"
        details.append(det)
    verdict(4, ok, "100 points per tree; " + "; ".join(details))


def test_c05_sign_alignment(verdict):
    checked, bad = 0, 0
    for d, N, K in [(1, 2, 2), (1, 3, 2), (1, 4, 2), (2, 2, 2), (2, 3, 1)]:
        t = tree_for(d, N, K)
        for k in range(K + 1):
            g = t.gens[k]
            for i in np.flatnonzero(~g.tie):
                checked += 1
                bad += np.sign(ii1_value(t, t.node(k, int(i)))) != np.sign(g.i1[i])
    verdict(5, bad == 0, f"sign(II1) == sign(I1) at {checked - bad}/{checked} non-tie nodes")


def test_c06_oracle_equivalence(verdict):
    worst, n, bad = 0.0, 0, 0
    for d, N, K in [(1, 3, 2), (1, 4, 2), (1, 5, 2), (2, 2, 2)]:
        t = tree_for(d, N, K)
        rng = np.random.default_rng(100 + N + d)
        for _ in range(20):
            k = int(rng.integers(K + 1))
            node = t.node(k, int(rng.integers(t.node_count(k))))
            pts = sample_points(node)
            x = pts[int(rng.integers(len(pts)))]
            total = evaluate_breakdown(t, node, x).total
            err = abs(total - brute_force_T(t, x))
            tol = max(1e-6, 1e-3 * abs(total))
            worst = max(worst, err / tol)
            bad += err > tol
            n += 1
    verdict(6, bad == 0, f"{n - bad}/{n} points within tolerance; worst error/tolerance {worst:.3g}")


@pytest.mark.slow
def test_c07_operator_growth(verdict):
    t0 = time.perf_counter()
    Ns = [4, 5, 6, 7, 8]
    mins, cont = [], []
    for N in Ns:
        s = summarize_ratios(ratio_report(tree_for(1, N, 2)))
        mins.append(s["min_ratio"])
        cont.append(s["max_continuous"])
    elapsed = time.perf_counter() - t0
    increasing = all(b > a for a, b in zip(mins, mins[1:]))
    top = [m / N for m, N in zip(mins[-3:], Ns[-3:])]
    mean = sum(top) / 3
    stable = all(abs(v - mean) <= 0.25 * mean for v in top)
    slope = np.polyfit(Ns, cont, 1)[0]
    flat = slope <= 0.01 * np.mean(cont)
    verdict(7, increasing and stable and flat and elapsed < 600,
            f"min |Tw|/w {[round(m, 3) for m in mins]}; ratio/N top three {[round(v, 3) for v in top]}; "
            f"continuous max {[round(c, 4) for c in cont]} slope {slope:.2e}; {elapsed:.0f}s")


def test_c08_truncation(verdict):
    same = True
    for d, N, K in [(1, 3, 2), (2, 2, 1)]:
        a, b = tree_for(d, N, K), tree_for(d, N, K + 1)
        for k in range(K + 1):
            same &= a.gens[k].i1.tobytes() == b.gens[k].i1.tobytes()
            for i in range(min(a.node_count(k), 40)):
                same &= ii1_value(a, a.node(k, i)) == ii1_value(b, b.node(k, i))
    K = 3
    a, b = tree_for(1, 3, K - 1), tree_for(1, 3, K)
    worst = 0.0
    for k in range(K - 1):
        for i in range(min(a.node_count(k), 12)):
            for x in sample_points(a.node(k, i)):
                ra = evaluate_breakdown(a, a.node(k, i), x).ratio
                rb = evaluate_breakdown(b, b.node(k, i), x).ratio
                worst = max(worst, abs(rb - ra) / abs(ra))
    verdict(8, same and worst < 0.05,
            f"I1/II1 bit-identical across K, K+1: {same}; max ratio change K-1 -> K at gen <= K-2: {worst:.2e}")


def test_c09_weak_type_mechanism(verdict):
    Ns = [4, 5, 6, 7]
    weak, energy, two = [], [], []
    for N in Ns:
        r = weak_type_ratio(1, N, HILBERT, K=1)
        weak.append(r.ratio)
        energy.append(r.adjoint_energy)
        tree = build(BuildParams(N, 1, 1, HILBERT, adjoint=True, max_support_cells=None))
        lhs, rhs = two_weight_ratio(tree, HILBERT, 2.0)
        two.append(lhs / rhs)
    weak_ok = all(b > a for a, b in zip(weak, weak[1:])) and all(e > 0 for e in energy)
    two_ok = all(b > a for a, b in zip(two, two[1:]))
    verdict(9, weak_ok and two_ok,
            f"weak-type ratio {[round(v, 4) for v in weak]} increasing and energy > 0: {weak_ok}; "
            f"two-weight ratio (p=2) {[round(v, 4) for v in two]} increasing: {two_ok}")


def test_c10_hump_series(verdict):
    P = HarnessParams(p=2.0, eps=0.75, N0=4, N_max=7, d=1, K=1)
    stats = {N: hump_stats(tree_for(1, N, 1), P.p) for N in range(P.N0, P.N_max + 1)}
    ser = hump_gliding_series(P, stats)
    B = ser["B_bound_partials"]
    steps = np.diff(B)
    cauchy = ser["m"][-1] == P.N0 + 10 and ser["B_tail_bound"] < 1e-8 and bool(np.all(steps[1:] < steps[:-1]))
    norm = ser["A_normalized_over_reference"]
    # bounded below: no term falls under half the first one
    bounded = min(norm) > 0 and min(norm) >= 0.5 * norm[0]
    raw = ser["A_over_reference"]
    verdict(10, cauchy and bounded,
            f"B tail at m=N0+10 {ser['B_tail_bound']:.2e}; normalized A/ref {[round(v, 4) for v in norm]} "
            f"(raw {[round(v, 4) for v in raw]})")


def test_c11_reverse_holder(verdict):
    partials, rho, diverges = reverse_holder_series(1, 3, 9, 1, 40)
    first = next((i for i, s in enumerate(partials) if s > 10**6), None)
    ok = rho == Fraction(243, 100) and diverges and first is not None and first < 40
    verdict(11, ok, f"rho = {rho} = {float(rho)}; partial sum exceeds 1e6 at term {first}")


def test_c12_sv_suite(verdict):
    spreads = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        ratios = []
        for _ in range(100):
            n = int(rng.integers(8, 25))
            v = StepWeight(1 / n, rng.integers(0, 5, n).astype(float))
            if not (v.values > 0).any():
                v = StepWeight(1 / n, np.ones(n))
            E = rng.random(n) < 0.4
            E[int(rng.choice(np.flatnonzero(v.values > 0)))] = True
            lhs, rhs = sv_bound_check(v, E)
            ratios.append(lhs / rhs)
        ratios = np.asarray(ratios)
        if not np.all(np.isfinite(ratios)):
            spreads.append(math.inf)
        else:
            spreads.append(float(ratios.max() / np.median(ratios)))
    v = StepWeight(1 / 10, np.array([0, 1, 3, 0, 2, 2, 0, 5, 1, 0], float))
    lhs, rhs = sv_bound_check(v, v.values > 0)
    stable = max(spreads) < 2 * min(spreads)
    verdict(12, stable and lhs / rhs == 1.0,
            f"max/median per seed {[round(s, 3) for s in spreads]}; identity ratio {lhs / rhs}")
