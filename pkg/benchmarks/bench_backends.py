"""Compare the compiled core with the numpy fallback on real workloads.

Usage::

    python benchmarks/bench_backends.py [--repeat 3] [--json out.json]

Each case runs the same inputs through both backends, reports the best wall
time of ``--repeat`` runs and the largest relative disagreement.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from sparse_weight_lab import BuildParams, build, parse_kernel
from sparse_weight_lab._accel import python_core
from sparse_weight_lab.io import write_json
from sparse_weight_lab.potential import point_units
from sparse_weight_lab.singular import cells_for

try:
    from sparse_weight_lab import _core as compiled_core
except ImportError:
    compiled_core = None


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _rel_diff(a, b):
    a, b = np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def _potential_case(kernel, d, N, K, shift, points=4):
    tree = build(BuildParams(N, d, K, parse_kernel(kernel), max_support_cells=None))
    cells = cells_for(tree)
    fam, axis, scale = tree.kernel.core_args()
    xs = [tree.node(tree.K, i).j_addr.center for i in range(min(points, tree.node_count(tree.K)))]
    group = np.zeros(len(cells), dtype=np.int64)
    rels = [cells.lo_float - point_units(x, cells.L).astype(float)[None, :] for x in xs]

    def run(core):
        return lambda: [core.cells_potential(fam, axis, scale, r, cells.side_float, cells.dens, group, 1, shift)[0]
                        for r in rels]

    name = f"cells_potential {kernel} d={d} N={N} K={K} shift={shift} ({len(cells)} cells x {len(xs)} points)"
    return name, run


def _pair_case(kernel, n_targets, n_sources, seed=0):
    spec = parse_kernel(kernel)
    rng = np.random.default_rng(seed)
    d = spec.d
    t = rng.random((n_targets, d)) * 1000 + 0.5
    s = rng.random((n_sources, d)) * 1000 + 2000.25
    w = rng.random(n_sources)
    fam, axis, scale = spec.core_args()

    def run(core):
        return lambda: core.pair_sum(fam, axis, scale, t, s, w)

    return f"pair_sum {kernel} {n_targets} x {n_sources}", run


CASES = [
    lambda: _potential_case("hilbert", 1, 5, 2, 0),
    lambda: _potential_case("hilbert", 1, 5, 2, 1),
    lambda: _potential_case("riesz:d=2,j=1", 2, 2, 2, 0),
    lambda: _pair_case("hilbert", 2000, 2000),
    lambda: _pair_case("riesz:d=2,j=1", 1000, 1000),
]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results as JSON")
    args = ap.parse_args(argv)
    if compiled_core is None:
        print("compiled core not built; only the numpy fallback is available", file=sys.stderr)
        return 1
    rows = []
    print(f"{'case':<78} {'compiled s':>11} {'numpy s':>11} {'speedup':>8} {'max rel diff':>13}")
    for make in CASES:
        name, run = make()
        tc, vc = _best(run(compiled_core), args.repeat)
        tp, vp = _best(run(python_core), args.repeat)
        diff = _rel_diff(np.concatenate([np.atleast_1d(v) for v in vc]) if isinstance(vc, list) else vc,
                         np.concatenate([np.atleast_1d(v) for v in vp]) if isinstance(vp, list) else vp)
        rows.append({"case": name, "compiled_s": tc, "numpy_s": tp, "speedup": tp / tc, "max_rel_diff": diff})
        print(f"{name:<78} {tc:>11.4g} {tp:>11.4g} {tp / tc:>8.2f} {diff:>13.3g}")
    if args.json:
        write_json(args.json, {"rows": rows})
    return 0


if __name__ == "__main__":
    sys.exit(main())
