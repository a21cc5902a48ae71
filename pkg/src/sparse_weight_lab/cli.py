"""``sparse-weight-lab <command>``: build, verify, evaluate and report.

Exit codes: 0 success, 1 invariant failure, 2 configuration or input error
(including no admissible cone), 3 resource guard (too large or too deep).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FormatError, InvariantViolation, NoConeFound, TooDeep, TooLarge
from .harness import (
    HarnessParams,
    calibrate_cross_hump,
    two_weight_ratio,
    cross_hump_bound,
    hump_gliding_series,
    hump_stats,
    local_a1_check,
    reverse_holder_series,
    weak_type_ratio,
    dual_form_note,
)
from .io import atomic_write, csv_text, dumps_json, write_csv, write_json
from .kernel import find_cones, parse_kernel
from .maximal import MAX_ENUMERATED_CUBES, certified_upper, maximal_lower, verify_cube_bound, verify_separation
from .plot import PlotError, ratio_chart_svg, tree_svg
from .singular import RATIO_COLUMNS, ii1_value, ratio_report, summarize_ratios
from .weight import DROP_TAIL, LEAF_UNIFORM, BuildParams, build, deserialize, serialize, validate

__all__ = ["main", "build_parser", "ConfigError"]


class ConfigError(ValueError):
    pass


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("SWL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SWL_THREADS={env!r} is not an integer") from exc
    return 1


def _say(msg: str = ""):
    print(msg, flush=True)


def _load_tree(path, check: bool = True):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return deserialize(text, max_support_cells=None, check=check)


def _kernel(ident: str, d: int | None = None):
    try:
        k = parse_kernel(ident)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if d is not None and k.d != d:
        raise ConfigError(f"kernel {ident} is {k.d}-dimensional but -d {d} was given")
    return k


# -- commands ------------------------------------------------------------------

def cmd_cones(args) -> int:
    spec = _kernel(args.kernel)
    cones = find_cones(spec, args.resolution)
    doc = {"kernel": spec.id, **cones.to_json()}
    if args.N is not None:
        params = BuildParams(args.N, spec.d, 0, spec, cones=cones)
        doc["A"] = build(params).A
        doc["cone_mode"] = params.resolved_cone_mode
    _say(f"kernel {spec.id}")
    _say(f"  z+ = {list(cones.z_plus)}   z- = {list(cones.z_minus)}")
    _say(f"  r = {cones.r}   lambda = {cones.lam}   tau = {list(cones.tau)}")
    if "A" in doc:
        _say(f"  A = {doc['A']} ({doc['cone_mode']} mode, N={args.N})")
    if args.json:
        write_json(args.json, doc)
    return 0


def cmd_build(args) -> int:
    spec = _kernel(args.kernel, args.d)
    params = BuildParams(args.N, args.d, args.K, spec, adjoint=args.adjoint, truncation=args.truncation,
                         tie_break=args.tie_break, cone_mode=args.cone_mode,
                         max_support_cells=None if args.max_support_cells < 0 else args.max_support_cells)
    tree = build(params)
    atomic_write(args.output, serialize(tree))
    _say(f"built d={tree.d} N={tree.N} K={tree.K} kernel={spec.id} A={tree.A} a={tree.a} "
         f"nodes={sum(len(g) for g in tree.gens)} -> {args.output}")
    return 0


def _verify_steps(tree, max_cubes: int):
    """Yield ``(name, ok, detail)`` in pipeline order."""
    stored = getattr(tree, "stored", {})
    problems = validate(tree, alpha=stored.get("alpha"), a=stored.get("a"), A=stored.get("A"))
    yield "structure", not problems, "; ".join(problems) or "ok"
    if tree.params.truncation == LEAF_UNIFORM:
        ok = tree.total_mass == 1
        yield "total-mass", ok, f"total mass {tree.total_mass}"
    else:
        expect = 1 - Fraction(tree.A, 1 + tree.A) ** (tree.K + 1)
        yield "total-mass", tree.total_mass == expect, f"total mass {tree.total_mass}, expected {expect}"
    full = tree.full_mode
    counts_ok = all(len(g) == tree.A**k for k, g in enumerate(tree.gens))
    a_ok = counts_ok and (not full or tree.A == 3 ** ((tree.N - 1) * tree.d))
    yield "A-uniformity", a_ok, f"A={tree.A}" + (f", full-cone 3^((N-1)d)={3 ** ((tree.N - 1) * tree.d)}" if full else "")
    for k in range(tree.K + 1):
        rep = verify_cube_bound(tree, k, max_cubes)
        yield f"cube-bound[k={k}]", rep.passed, (f"{rep.checked} cubes, {len(rep.violations)} violations, equality "
                                              f"{rep.equality_tree_cubes} tree + {rep.equality_j_cubes} J + {rep.equality_other} other")
    if tree.N >= 3:
        sep = verify_separation(tree)
        yield "separation", sep.passed, f"min gap/side {sep.min_ratio} over {sep.pairs} pairs"
    else:
        yield "separation", True, "skipped (N < 3)"
    bad = []
    for k in range(tree.K + 1):
        if k == tree.K and tree.params.truncation == DROP_TAIL:
            continue
        for b in (1, -1):
            idx = np.flatnonzero((tree.gens[k].branch == b) & ~tree.gens[k].tie)
            if len(idx) == 0:
                continue
            v = ii1_value(tree, tree.node(k, int(idx[0])))
            if np.sign(v) != b:
                bad.append(f"generation {k} branch {b:+d}: II1={v:.3g}")
    yield "sign-matching", not bad, "; ".join(bad) or "sign(II1) = sign(I1) at all non-tie nodes"


def cmd_verify(args) -> int:
    tree = _load_tree(args.tree, check=False)
    results = []
    code = 0
    for name, ok, detail in _verify_steps(tree, args.max_cubes):
        results.append({"check": name, "passed": bool(ok), "detail": detail})
        _say(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            code = 1
            break
    if args.report:
        write_json(args.report, {"tree": str(args.tree), "checks": results, "passed": code == 0})
    if code:
        raise InvariantViolation(results[-1]["check"], results[-1]["detail"])
    return 0


def cmd_operator(args) -> int:
    tree = _load_tree(args.tree)
    rows = ratio_report(tree, samples_per_node=args.samples, node_limit=args.node_limit, threads=_threads(args))
    summary = summarize_ratios(rows)
    for g, s in sorted(summary["generations"].items()):
        _say(f"generation {g}: min |Tw|/w = {s['min_ratio']:.6g}, max continuous/w = {s['max_continuous']:.6g} "
             f"({s['points']} points)")
    _say(f"min ratio {summary['min_ratio']:.6g}, ratio/N {summary['min_ratio_over_N']:.6g}")
    if args.ratios:
        write_csv(args.ratios, RATIO_COLUMNS + ["continuous"], rows)
    if args.summary:
        write_json(args.summary, {"kind": "ratio_report", "d": tree.d, "N": tree.N, "K": tree.K,
                                  "summary": summary, "rows": rows})
    return 0


MAXIMAL_COLUMNS = ["generation", "node_id", "x", "density", "lower", "certified_upper", "witness_low", "witness_side"]


def cmd_maximal(args) -> int:
    tree = _load_tree(args.tree)
    for k in range(tree.K + 1):
        rep = verify_cube_bound(tree, k, args.max_cubes)
        if not rep.passed:
            raise InvariantViolation(f"cube-bound[k={k}]", f"{len(rep.violations)} violations")
    rng = np.random.default_rng(args.seed)
    rows, worst = [], 0.0
    gens = rng.integers(0, tree.K + 1, size=args.points)
    for k in gens.tolist():
        i = int(rng.integers(tree.node_count(k)))
        node = tree.node(k, i)
        # random point on a fine grid inside the J-cube, away from its boundary
        q = 3**6
        x = tuple(lo + node.j_addr.side * Fraction(int(t), q)
                  for lo, t in zip(node.j_addr.low, rng.integers(1, q, size=tree.d)))
        est = maximal_lower(tree, x)
        up = certified_upper(tree, x)
        dens = float(est.density_at_x)
        if not dens <= est.lower <= up:
            raise InvariantViolation("maximal-bracket", f"at generation {k} node {i}")
        worst = max(worst, est.lower / dens)
        rows.append({"generation": k, "node_id": i, "x": [float(v) for v in x], "density": dens,
                     "lower": est.lower, "certified_upper": up,
                     "witness_low": [float(v) for v in est.witness[0]], "witness_side": float(est.witness[1])})
    _say(f"{len(rows)} points: density <= lower <= 9^d density; max lower/density = {worst:.6g}")
    if args.output:
        write_csv(args.output, MAXIMAL_COLUMNS, rows)
    return 0


def _n_range(args):
    if args.N_max < args.N0:
        raise ConfigError("--N-max must be at least --N0")
    return list(range(args.N0, args.N_max + 1))


def _trend_flag(values) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def cmd_thm1(args) -> int:
    spec = _kernel(args.kernel, args.d)
    rows = []
    for N in _n_range(args):
        tree = build(BuildParams(N, args.d, args.K, spec, adjoint=True, max_support_cells=None))
        lhs, rhs = two_weight_ratio(tree, spec, args.p, args.s, args.mw_mode, measure=args.measure)
        rows.append({"N": N, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
        _say(f"N={N}: int|Tf|^p w = {lhs:.6g}, int|f|^p (Mw/w)^p w = {rhs:.6g}, ratio {lhs / rhs:.6g}")
    flag = _trend_flag([r["ratio"] for r in rows])
    _say(f"ratio strictly increasing: {flag}")
    _emit_table(args, "two_weight", ["N", "lhs", "rhs", "ratio"], rows, {"increasing": flag})
    return 0


def cmd_thm2(args) -> int:
    spec = _kernel(args.kernel, args.d)
    rows = []
    for N in _n_range(args):
        r = weak_type_ratio(args.d, N, spec, args.K, args.s, args.mw_mode, measure=args.measure)
        rows.append({"N": N, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio, "lambda0": r.lambda0,
                     "adjoint_energy": r.adjoint_energy, "tf_w": r.tf_w, "cells": r.cells})
        _say(f"N={N}: sup lambda w(|Tf|>lambda) = {r.lhs:.6g}, int|f|Mw = {r.rhs:.6g}, ratio {r.ratio:.6g}, "
             f"int|T*w/Mw|^2 w = {r.adjoint_energy:.6g}")
    flags = {"increasing": _trend_flag([r["ratio"] for r in rows]), "positive": all(r["adjoint_energy"] > 0 for r in rows)}
    _say(f"ratio strictly increasing: {flags['increasing']}; positivity: {flags['positive']}")
    _emit_table(args, "thm2", ["N", "lhs", "rhs", "ratio", "lambda0", "adjoint_energy", "tf_w", "cells"], rows, flags)
    return 0


def _hump_trees(args, spec):
    return {N: build(BuildParams(N, args.d, args.K, spec, max_support_cells=None)) for N in _n_range(args)}


def cmd_thm3(args) -> int:
    spec = _kernel(args.kernel, args.d)
    trees = _hump_trees(args, spec)
    rep = dual_form_note(args.p, trees, args.eps, args.s)
    for r in rep["rows"]:
        _say(f"N={r['N']}: dual-form partial {r['dual_partial']:.6g}, weighted partial {r['weighted_partial']:.6g}")
    _say(f"pointwise (w/Mw)^p' range {rep['pointwise_ratio_range']}, bracket {rep['bracket']}: {rep['bracket_holds']}")
    _emit_table(args, "thm3", ["N", "dual", "weighted", "dual_partial", "weighted_partial"], rep["rows"],
                {"bracket_holds": rep["bracket_holds"]}, extra=rep)
    return 0


def cmd_thm4(args) -> int:
    spec = _kernel(args.kernel, args.d)
    hp = HarnessParams(p=args.p, eps=args.eps, N0=args.N0, N_max=args.N_max, d=args.d, K=args.K, s=args.s,
                       series_span=args.span)
    trees = _hump_trees(args, spec)
    stats = {N: hump_stats(t, hp.p, hp.s) for N, t in trees.items()}
    C = calibrate_cross_hump(args.d, spec, hp.N0, K=hp.K, trees={})
    ser = hump_gliding_series(hp, stats, C=C)
    table = []
    for i, N in enumerate(ser["N"]):
        table.append({"N": N, "term": ser["A_terms"][i], "partial": ser["A_partials"][i],
                      "reference": ser["reference_partials"][i], "ratio": ser["A_over_reference"][i],
                      "normalized_ratio": ser["A_normalized_over_reference"][i]})
    btable = [{"m": m, "term": t, "partial": p} for m, t, p in zip(ser["m"], ser["B_terms"], ser["B_bound_partials"])]
    cross = []
    Ns = _n_range(args)
    for N in Ns:
        for J in Ns:
            if N != J:
                act, bound = cross_hump_bound(args.d, N, J, spec, C=C, K=hp.K)
                cross.append({"N": N, "J": J, "actual": act, "bound": bound, "ok": act <= bound * (1 + 1e-12)})
    a1 = local_a1_check(trees, samples=args.samples)
    for r in table:
        _say(f"N={r['N']}: A partial {r['partial']:.6g}, reference {r['reference']:.6g}, ratio {r['ratio']:.6g} "
             f"(normalized {r['normalized_ratio']:.6g})")
    _say(f"B partial at m={ser['m'][-1]}: {ser['B_bound_partials'][-1]:.6g}, tail bound {ser['B_tail_bound']:.3g}")
    _say(f"cross-hump bound holds at {sum(c['ok'] for c in cross)}/{len(cross)} pairs (C={C:.6g})")
    for N, r in a1.items():
        _say(f"hump {N}: max lower/(9^d w) {r['max_lower_over_cap']:.6g}, cross-hump correction {r['cross_hump_correction']:.3g}")
    flags = {"B_tail_below_1e-8": ser["B_tail_bound"] < 1e-8, "cross_hump_ok": all(c["ok"] for c in cross),
             "local_a1_ok": all(r["bracket_holds"] for r in a1.values())}
    extra = {"series": ser, "cross_hump": cross, "cross_hump_C": C, "local_a1": {str(k): v for k, v in a1.items()},
             "note": "At finite truncation, unboundedness shows only as growth of the partial sums."}
    _emit_table(args, "thm4", ["N", "term", "partial", "reference", "ratio", "normalized_ratio"], table, flags, extra=extra)
    if args.b_csv:
        write_csv(args.b_csv, ["m", "term", "partial"], btable)
    return 0


def cmd_rh(args) -> int:
    A = args.A if args.A is not None else 3 ** ((args.N - 1) * args.d)
    eps = Fraction(args.eps).limit_denominator(10**6)
    partials, rho, div = reverse_holder_series(args.d, args.N, A, eps, args.terms)
    first = next((i for i, v in enumerate(partials) if v > 10**6), None)
    _say(f"rho = {rho} ({float(rho):.6g}), diverges: {div}")
    _say(f"partial sum after {args.terms + 1} terms: {float(partials[-1]):.6g}; exceeds 1e6 at term {first}")
    rows = [{"m": i, "term": float(partials[i] - (partials[i - 1] if i else 0)), "partial": float(v)}
            for i, v in enumerate(partials)]
    _emit_table(args, "reverse_holder", ["m", "term", "partial"], rows,
                {"diverges": bool(div)}, extra={"rho": str(rho), "rho_float": float(rho), "A": A,
                                                "first_above_1e6": first})
    return 0


def cmd_plot(args) -> int:
    try:
        doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {args.input}: {exc}") from exc
    if isinstance(doc, dict) and doc.get("header", {}).get("format") == "swl-tree":
        tree = deserialize(json.dumps(doc), max_support_cells=None)
        svg = tree_svg(tree)
    elif isinstance(doc, dict) and doc.get("kind") == "ratio_report":
        series: dict = {}
        for r in doc.get("rows", []):
            series.setdefault(f"generation {r['generation']}", []).append((float(r["N"]), float(r["ratio"])))
        mins = {k: sorted({x: min(y for xx, y in v if xx == x) for x, _ in v}.items()) for k, v in series.items()}
        svg = ratio_chart_svg(mins, title="min |Tw|/w", ylabel="|Tw|/w")
    elif isinstance(doc, dict) and "rows" in doc:
        rows = doc["rows"]
        key = "N" if rows and "N" in rows[0] else "m"
        cols = [c for c in ("ratio", "normalized_ratio", "partial") if rows and c in rows[0]][:1] or []
        series = {c: [(float(r[key]), float(r[c])) for r in rows if r.get(c) is not None] for c in cols}
        svg = ratio_chart_svg(series, title=str(doc.get("name", "")), xlabel=key)
    else:
        raise ConfigError("input is neither a tree file nor a report")
    atomic_write(args.output, svg)
    _say(f"wrote {args.output}")
    return 0


def _emit_table(args, name, columns, rows, flags, extra=None):
    if getattr(args, "output", None):
        write_csv(args.output, columns, rows)
    if getattr(args, "report", None):
        doc = {"name": name, "rows": rows, "flags": flags}
        if extra:
            doc.update({k: v for k, v in extra.items() if k not in doc})
        write_json(args.report, doc)


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values (keys as option names)")
    common.add_argument("--threads", type=int, help="worker cap (default: SWL_THREADS or 1)")

    p = argparse.ArgumentParser(prog="sparse-weight-lab", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("cones", parents=[common], help="admissible cone data of a kernel")
    s.add_argument("--kernel", required=True)
    s.add_argument("--resolution", type=int, default=360)
    s.add_argument("-N", type=int, help="also report the child count A for this N")
    s.add_argument("--json", help="write the cone data as JSON")
    s.set_defaults(func=cmd_cones)

    s = sub.add_parser("build", parents=[common], help="build a weight tree")
    s.add_argument("-d", type=int, default=1)
    s.add_argument("-N", type=int, required=True)
    s.add_argument("-K", type=int, default=2)
    s.add_argument("--kernel", default="hilbert")
    s.add_argument("--adjoint", action="store_true")
    s.add_argument("--truncation", choices=[LEAF_UNIFORM, DROP_TAIL], default=LEAF_UNIFORM)
    s.add_argument("--cone-mode", choices=["auto", "full", "cap"], default="auto")
    s.add_argument("--tie-break", type=int, choices=[1, -1], default=1)
    s.add_argument("--max-support-cells", type=int, default=1_000_000, help="negative disables the guard")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("verify", parents=[common], help="check every invariant of a tree file")
    s.add_argument("tree")
    s.add_argument("--max-cubes", type=int, default=MAX_ENUMERATED_CUBES)
    s.add_argument("--report", help="write the check list as JSON")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("operator", parents=[common], help="|Tw|/w with the five-piece breakdown")
    s.add_argument("tree")
    s.add_argument("--ratios", help="CSV of per-point rows")
    s.add_argument("--summary", help="JSON report")
    s.add_argument("--samples", type=int, default=None, help="points per node (default 1 + 2^d)")
    s.add_argument("--node-limit", type=int, default=64)
    s.set_defaults(func=cmd_operator)

    s = sub.add_parser("maximal", parents=[common], help="maximal-function bracket at support points")
    s.add_argument("tree")
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-cubes", type=int, default=MAX_ENUMERATED_CUBES)
    s.add_argument("-o", "--output", help="CSV of sampled points")
    s.set_defaults(func=cmd_maximal)

    def harness_opts(s, p_default=2.0):
        s.add_argument("-d", type=int, default=1)
        s.add_argument("--kernel", default="hilbert")
        s.add_argument("--N0", type=int, default=4)
        s.add_argument("--N-max", type=int, default=7)
        s.add_argument("-K", type=int, default=1)
        s.add_argument("-p", type=float, default=p_default)
        s.add_argument("-s", type=int, default=1, help="sub-resolution of support cells")
        s.add_argument("-o", "--output", help="CSV table")
        s.add_argument("--report", help="JSON report")

    s = sub.add_parser("thm1", parents=[common], help="two-weight ratio over N")
    harness_opts(s)
    s.add_argument("--mw-mode", choices=["w", "upper", "lower"], default="w")
    s.add_argument("--measure", choices=["J", "support"], default="J")
    s.set_defaults(func=cmd_thm1)

    s = sub.add_parser("thm2", parents=[common], help="weak-type ratio over N")
    harness_opts(s)
    s.add_argument("--mw-mode", choices=["w", "upper", "lower"], default="w")
    s.add_argument("--measure", choices=["J", "support"], default="J")
    s.set_defaults(func=cmd_thm2)

    s = sub.add_parser("thm3", parents=[common], help="dual form against the weighted integral, hump by hump")
    harness_opts(s)
    s.add_argument("--eps", type=float, default=0.75)
    s.set_defaults(func=cmd_thm3)

    s = sub.add_parser("thm4", parents=[common], help="hump-gliding series, cross-hump bounds, local A1")
    harness_opts(s)
    s.add_argument("--eps", type=float, default=0.75)
    s.add_argument("--span", type=int, default=10, help="B-series runs to N0 + span")
    s.add_argument("--samples", type=int, default=8, help="support points per hump for the local A1 check")
    s.add_argument("--b-csv", help="CSV of the B-bound series")
    s.set_defaults(func=cmd_thm4)

    s = sub.add_parser("rh", parents=[common], help="reverse Hoelder divergence series")
    s.add_argument("-d", type=int, default=1)
    s.add_argument("-N", type=int, default=3)
    s.add_argument("-A", type=int, help="child count (default 3^((N-1)d))")
    s.add_argument("--eps", type=float, default=1.0)
    s.add_argument("--terms", type=int, default=40)
    s.add_argument("-o", "--output", help="CSV table")
    s.add_argument("--report", help="JSON report")
    s.set_defaults(func=cmd_rh)

    s = sub.add_parser("plot", parents=[common], help="SVG of a tree (d <= 2) or a report")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def _scan_config(argv, commands):
    """``(command, config path)`` from a raw argument list, before parsing."""
    command = next((a for a in argv if a in commands), None)
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    return command, path


def _apply_config(parser, argv):
    """Merge a JSON config under the command line: config values become
    defaults, explicit flags win.  Unknown keys are rejected."""
    argv = list(sys.argv[1:] if argv is None else argv)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command, path = _scan_config(argv, sub.choices)
    if path is None or command is None:
        return parser.parse_args(argv)
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    sp = sub.choices[command]
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise ConfigError(f"unknown config key {key!r} for command {command}")
        act = actions[dest]
        if isinstance(act, argparse._StoreTrueAction):
            if not isinstance(val, bool):
                raise ConfigError(f"config key {key!r} must be true or false")
        elif val is not None:
            if act.type is not None:
                if isinstance(val, bool) or (act.type is int and isinstance(val, float)):
                    raise ConfigError(f"config key {key!r} has the wrong type")
                try:
                    val = act.type(val)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"config key {key!r}: {exc}") from exc
            elif not isinstance(val, str):
                raise ConfigError(f"config key {key!r} must be a string")
            if act.choices is not None and val not in act.choices:
                raise ConfigError(f"config key {key!r} must be one of {list(act.choices)}")
        defaults[dest] = val
    for a in sp._actions:
        if a.dest in defaults:
            a.required = False
            if not a.option_strings:
                a.nargs = "?"
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        _threads(args)
        return int(args.func(args) or 0)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else 2
    except InvariantViolation as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, NoConeFound, FormatError, PlotError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TooLarge, TooDeep) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
