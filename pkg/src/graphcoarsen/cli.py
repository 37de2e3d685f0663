"""Command line harness: coarsening runs, metric grids, runtime benchmarks
and table pivoting.

All output is deterministic for a fixed config and seed: grid cells run in a
worker pool but rows are sorted before writing, and floats are printed with 17
significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import baselines, coarsening, local_variation, spectral
from .coarsening import Hierarchy, interlacing_gammas, load_hierarchy, save_hierarchy
from .graph import GraphFormatError, WeightedGraph, build_laplacian, load_graph

RESULTS_SCHEMA = ("# graphcoarsen results v1: "
                  "graph,method,ratio,k,epsilon,eig_err,sin_theta,"
                  "gamma1,gamma2,bounds_ok,wall_ms")
BENCH_SCHEMA = "# graphcoarsen bench v1: method,n_edges,mean_ms,reps,censored"

CONTRACTION_METHODS = ("local-var-edge", "local-var-neigh", "heavy-edge",
                       "algebraic-distance", "affinity")
ALL_METHODS = CONTRACTION_METHODS + ("kron",)


def _fmt(x):
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return f"{x:.17g}"
    return str(x)


def _target_size(n_vertices, ratio):
    """n = round((1 - r) N); r in [0, 1) with at least one vertex left."""
    if ratio >= 1.0 or ratio < 0.0:
        raise ValueError(f"reduction ratio must be in [0, 1), got {ratio}")
    return max(1, int(round((1.0 - ratio) * n_vertices)))


def reduce_graph(graph, method, ratio, k, seed=0, eps_threshold=math.inf):
    """Run one reduction; returns a Hierarchy or a KronSequence."""
    n_target = _target_size(graph.n_vertices, ratio)
    if method == "local-var-edge":
        return local_variation.coarsen_multilevel(
            graph, k=min(k, graph.n_vertices), eps_threshold=eps_threshold,
            n_target=n_target, family_kind="edge")
    if method == "local-var-neigh":
        return local_variation.coarsen_multilevel(
            graph, k=min(k, graph.n_vertices), eps_threshold=eps_threshold,
            n_target=n_target, family_kind="neighborhood")
    if method == "kron":
        if n_target >= graph.n_vertices:
            return baselines.KronSequence(graph, (), ())
        return baselines.kron_coarsen(graph, n_target)
    if method in CONTRACTION_METHODS:
        return baselines.matching_coarsen(graph, method, n_target, seed=seed)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Generators (benchmark helpers; the library itself ships none)
# ---------------------------------------------------------------------------

def random_regular_graph(n, d, seed=0, max_tries=200) -> WeightedGraph:
    """Seeded d-regular simple graph via the pairing model.

    Self-loops and duplicate edges left by the random pairing are repaired by
    random edge swaps; a try that fails to converge restarts the pairing.
    """
    if n * d % 2:
        raise ValueError("n * d must be even")
    if d >= n:
        raise ValueError("degree must be below the vertex count")
    rng = np.random.default_rng(seed)
    m = n * d // 2
    for _ in range(max_tries):
        stubs = np.repeat(np.arange(n), d)
        rng.shuffle(stubs)
        a, b = stubs[0::2].copy(), stubs[1::2].copy()
        for _ in range(200):
            lo, hi = np.minimum(a, b), np.maximum(a, b)
            keys = lo * n + hi
            order = np.argsort(keys, kind="stable")
            dup = np.zeros(m, dtype=bool)
            dup[order[1:]] = keys[order[1:]] == keys[order[:-1]]
            bad = np.flatnonzero((a == b) | dup)
            if len(bad) == 0:
                return WeightedGraph(
                    n, lo, hi, np.ones(m),
                    {"generator": f"regular(n={n},d={d},seed={seed})"})
            partners = rng.integers(0, m, size=len(bad))
            # swap one at a time; vectorized fancy-index swaps drop stubs
            # when the index sets overlap
            for i, j in zip(bad.tolist(), partners.tolist()):
                b[i], b[j] = b[j], b[i]
    raise RuntimeError(f"pairing model failed after {max_tries} tries")


def erdos_renyi_graph(n, p, seed=0, require_connected=True,
                      max_tries=200) -> WeightedGraph:
    """Seeded G(n, p), optionally retried until connected."""
    from .graph import is_connected

    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        iu = np.triu_indices(n, k=1)
        mask = rng.random(len(iu[0])) < p
        g = WeightedGraph(n, iu[0][mask], iu[1][mask], np.ones(int(mask.sum())),
                          {"generator": f"er(n={n},p={p},seed={seed})"})
        if not require_connected or is_connected(g):
            return g
    raise RuntimeError(f"no connected G({n},{p}) sample in {max_tries} tries")


def parse_graph_spec(spec, seed=0) -> WeightedGraph:
    """A graph path, or a generator spec ``regular:n=1024,d=10`` /
    ``er:n=100,p=0.1`` (an explicit ``seed=`` in the spec wins)."""
    if ":" in spec and not os.path.exists(spec):
        kind, _, rest = spec.partition(":")
        kw = {}
        for item in rest.split(","):
            key, _, val = item.partition("=")
            kw[key.strip()] = float(val) if "." in val else int(val)
        kw.setdefault("seed", seed)
        if kind == "regular":
            return random_regular_graph(int(kw["n"]), int(kw["d"]), int(kw["seed"]))
        if kind == "er":
            return erdos_renyi_graph(int(kw["n"]), float(kw["p"]), int(kw["seed"]))
        raise ValueError(f"unknown generator {kind!r}")
    return load_graph(spec)


# ---------------------------------------------------------------------------
# Metric rows
# ---------------------------------------------------------------------------

def evaluate_reduction(graph, reduction, k, label, method, ratio) -> dict:
    """One results row for a finished reduction."""
    t0 = time.perf_counter()
    L = build_laplacian(graph)
    if isinstance(reduction, Hierarchy):
        h = reduction
        eps = spectral.restricted_epsilon(L, h, min(k, h.n_coarse, graph.n_vertices))
        eig_err = spectral.eigenvalue_error(
            L, h.coarsest_laplacian, min(k, h.n_coarse))
        kk = min(k, h.n_coarse)
        sin_theta = (spectral.sin_theta_frobenius(L, h, kk)
                     if h.n_coarse <= coarsening.DENSE_GUARD else math.nan)
        g = interlacing_gammas(h)
        checks = [
            spectral.check_theorem_interlacing(L, h)
            if graph.n_vertices <= coarsening.DENSE_GUARD else None,
            spectral.check_theorem_eigenvalues(L, h, kk),
            spectral.check_theorem_sintheta(L, h, kk)
            if h.n_coarse <= coarsening.DENSE_GUARD else None,
            spectral.lift_lengths_lemma_check(L, h, kk),
        ]
        bounds_ok = all(c is None or c.ok for c in checks)
        gamma1, gamma2 = g.gamma1, g.gamma2
    else:
        # Schur-complement reductions define no contraction operators, so the
        # restricted-similarity metrics do not apply; only the eigenvalue
        # error is reported
        eps = math.nan
        sin_theta = math.nan
        gamma1 = gamma2 = math.nan
        eig_err = spectral.eigenvalue_error(
            L, reduction.coarsest_laplacian, min(k, reduction.n_coarse))
        bounds_ok = True
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return {"graph": label, "method": method, "ratio": ratio, "k": k,
            "epsilon": eps, "eig_err": eig_err, "sin_theta": sin_theta,
            "gamma1": gamma1, "gamma2": gamma2, "bounds_ok": bounds_ok,
            "wall_ms": wall_ms}


def _write_rows(rows, out, fmt):
    cols = ["graph", "method", "ratio", "k", "epsilon", "eig_err",
            "sin_theta", "gamma1", "gamma2", "bounds_ok", "wall_ms"]
    rows = sorted(rows, key=lambda r: (r["graph"], r["method"],
                                       r["ratio"], r["k"]))
    fh = open(out, "w") if out not in (None, "-") else sys.stdout
    try:
        if fmt == "json":
            json.dump([{c: (None if isinstance(r[c], float) and math.isnan(r[c])
                            else r[c]) for c in cols} for r in rows],
                      fh, indent=1)
            fh.write("\n")
        else:
            fh.write(RESULTS_SCHEMA + "\n")
            fh.write(",".join(cols) + "\n")
            for r in rows:
                fh.write(",".join(_fmt(r[c]) for c in cols) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return rows


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Grid of evaluation cells: graphs x methods x ratios x ks."""

    graphs: list
    methods: list
    ratios: list
    ks: list
    eps_threshold: float = math.inf
    seed: int = 0
    output: str = "-"
    format: str = "csv"

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.ratios, self.ratios[1:])):
            raise ValueError("ratios must be strictly increasing")
        for r in self.ratios:
            if not 0.0 <= r < 1.0:
                raise ValueError(f"ratio {r} outside [0, 1)")
        for m in self.methods:
            if m not in ALL_METHODS:
                raise ValueError(f"unknown method {m!r}")

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        if str(doc.get("eps_threshold", "inf")).lower() in ("inf", "infinity"):
            doc["eps_threshold"] = math.inf
        return cls(**doc)


def cmd_coarsen(args):
    try:
        graph = parse_graph_spec(args.input, seed=args.seed)
    except (OSError, GraphFormatError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        n_target = _target_size(graph.n_vertices, args.ratio)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.method == "kron":
        print("error: kron reductions have no hierarchy serialization",
              file=sys.stderr)
        return 2
    h = reduce_graph(graph, args.method, args.ratio, args.k,
                     seed=args.seed, eps_threshold=args.eps_threshold)
    if args.out:
        try:
            save_hierarchy(h, args.out)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    sizes = h.level_sizes()
    print(f"levels: {h.n_levels}")
    print("sizes: " + " -> ".join(str(s) for s in sizes))
    print("sigmas: " + " ".join(_fmt(float(s)) for s in h.sigmas))
    print(f"eps_bound: {_fmt(h.eps_bound)}")
    if h.stalled or h.n_coarse > n_target:
        print(f"stopped early: reached n={h.n_coarse}, target was {n_target}")
    return 0


def _eval_cell(cell):
    label, graph, method, ratio, k, seed, eps_threshold = cell
    reduction = reduce_graph(graph, method, ratio, k, seed=seed,
                             eps_threshold=eps_threshold)
    return evaluate_reduction(graph, reduction, k, label, method, ratio)


def _pool_size():
    env = os.environ.get("COARSEN_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def cmd_eval(args):
    rows = []
    try:
        if args.config:
            cfg = ExperimentConfig.from_file(args.config)
            cells = []
            for spec in cfg.graphs:
                graph = parse_graph_spec(spec, seed=cfg.seed)
                label = os.path.basename(str(spec))
                for method in cfg.methods:
                    for ratio in cfg.ratios:
                        for k in cfg.ks:
                            cells.append((label, graph, method, ratio, k,
                                          cfg.seed, cfg.eps_threshold))
            with ThreadPoolExecutor(max_workers=_pool_size()) as pool:
                rows = list(pool.map(_eval_cell, cells))
            out, fmt = cfg.output, cfg.format
            if args.out:
                out = args.out
        else:
            if not (args.graph and args.hierarchy):
                print("error: provide --config or both --graph and --hierarchy",
                      file=sys.stderr)
                return 1
            graph = parse_graph_spec(args.graph)
            h = load_hierarchy(args.hierarchy, graph)
            method = h.levels[0].method_tag if h.levels else "identity"
            ratio = 1.0 - h.n_coarse / graph.n_vertices
            rows = [evaluate_reduction(graph, h, args.k,
                                       os.path.basename(args.graph),
                                       method, ratio)]
            out, fmt = args.out, args.format
    except (OSError, GraphFormatError, json.JSONDecodeError,
            coarsening.HierarchyFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rows = _write_rows(rows, out, fmt)
    if args.strict and any(not r["bounds_ok"] for r in rows):
        return 3
    return 0


def cmd_bench(args):
    sizes = [2 ** e for e in range(args.min_exp, args.max_exp + 1)]
    fh = open(args.out, "w") if args.out not in (None, "-") else sys.stdout
    try:
        fh.write(BENCH_SCHEMA + "\n")
        fh.write("method,n_edges,mean_ms,reps,censored\n")
        for method in args.methods:
            for m_edges in sizes:
                n = 2 * m_edges // args.degree
                graph = random_regular_graph(n, args.degree, seed=args.seed)
                times = []
                censored = 0
                for rep in range(args.reps):
                    t0 = time.perf_counter()
                    reduce_graph(graph, method, args.ratio, args.k,
                                 seed=args.seed + rep)
                    dt = time.perf_counter() - t0
                    if dt > args.cap:
                        censored += 1
                        break
                    times.append(dt)
                mean_ms = (1000.0 * sum(times) / len(times)
                           if times else math.nan)
                fh.write(f"{method},{graph.n_edges},{_fmt(mean_ms)},"
                         f"{len(times)},{censored}\n")
                fh.flush()
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_table(args):
    try:
        with open(args.results) as fh:
            lines = [ln.rstrip("\n") for ln in fh
                     if ln.strip() and not ln.startswith("#")]
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    header = lines[0].split(",")
    try:
        gi, mi, ri = (header.index(c) for c in ("graph", "method", "ratio"))
        vi = header.index(args.metric)
    except ValueError:
        print(f"error: metric {args.metric!r} not in results header",
              file=sys.stderr)
        return 1
    cells = {}
    methods, rows_keys = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        key = (parts[gi], parts[ri])
        if key not in rows_keys:
            rows_keys.append(key)
        if parts[mi] not in methods:
            methods.append(parts[mi])
        cells[(key, parts[mi])] = parts[vi]
    methods.sort()
    rows_keys.sort()
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w")
    try:
        if args.format == "csv":
            out.write("graph,ratio," + ",".join(methods) + "\n")
            for key in rows_keys:
                vals = []
                for m in methods:
                    v = cells.get((key, m), "")
                    if v == "" and (key, m) not in cells:
                        print(f"warning: missing cell {key} {m}",
                              file=sys.stderr)
                    vals.append(v)
                out.write(",".join(key) + "," + ",".join(vals) + "\n")
        else:
            widths = [max(len(m), 12) for m in methods]
            out.write(f"{'graph':20} {'ratio':>6} "
                      + " ".join(f"{m:>{w}}" for m, w in zip(methods, widths))
                      + "\n")
            for key in rows_keys:
                vals = []
                for m, w in zip(methods, widths):
                    v = cells.get((key, m))
                    if v is None:
                        print(f"warning: missing cell {key} {m}",
                              file=sys.stderr)
                        v = "-"
                    vals.append(f"{v[:w]:>{w}}")
                out.write(f"{key[0]:20} {key[1]:>6} " + " ".join(vals) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="graphcoarsen",
                                description="graph coarsening harness")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coarsen", help="coarsen one graph, write hierarchy")
    c.add_argument("--input", required=True,
                   help="graph file or generator spec")
    c.add_argument("--method", default="local-var-edge", choices=ALL_METHODS)
    c.add_argument("--ratio", type=float, required=True,
                   help="reduction ratio r = 1 - n/N")
    c.add_argument("--k", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--eps-threshold", type=float, default=math.inf)
    c.add_argument("--out", help="hierarchy JSON output path")
    c.set_defaults(func=cmd_coarsen)

    e = sub.add_parser("eval", help="emit metric rows")
    e.add_argument("--config", help="experiment grid JSON")
    e.add_argument("--graph", help="base graph (single-hierarchy mode)")
    e.add_argument("--hierarchy", help="hierarchy JSON (single mode)")
    e.add_argument("--k", type=int, default=10)
    e.add_argument("--out", default=None)
    e.add_argument("--format", default="csv", choices=("csv", "json"))
    e.add_argument("--strict", action="store_true",
                   help="nonzero exit when any bounds_ok is false")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="runtime scaling benchmark")
    b.add_argument("--methods", nargs="+", default=["local-var-edge"],
                   choices=ALL_METHODS)
    b.add_argument("--min-exp", type=int, default=10,
                   help="smallest edge count as a power of two")
    b.add_argument("--max-exp", type=int, default=14)
    b.add_argument("--degree", type=int, default=10)
    b.add_argument("--ratio", type=float, default=0.5)
    b.add_argument("--k", type=int, default=10)
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--cap", type=float, default=100.0,
                   help="per-run wall time cap in seconds")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("table", help="pivot a results CSV")
    t.add_argument("--results", required=True)
    t.add_argument("--metric", default="epsilon")
    t.add_argument("--format", default="text", choices=("text", "csv"))
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_table)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
