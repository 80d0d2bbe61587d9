"""Compare the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--nodes 300] [--repeat 3]

Both paths are called with the same inputs and their results are checked for
equality before timing.  The first numba call (compilation or cache load) is
excluded.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from piperetime import kernels
from piperetime._accel import HAVE_NUMBA
from piperetime.delay_model import annotate, default_model
from piperetime.fuzz import random_design
from piperetime.ir import OpKind
from piperetime.simulator import random_stimulus, simulate_many
from piperetime.wgraph import Role, WEdge, WGraph, WNode
from piperetime.timing import build_constraints, compute_wd, diff_system, anchored_nodes, search_target


def _big_graph(n: int, seed: int) -> WGraph:
    """Layered comb graph: forward edges mostly register-free, back edges registered."""
    rng = np.random.default_rng(seed)
    kinds = [OpKind.ADD, OpKind.MUL, OpKind.XOR, OpKind.SUB]
    nodes = [WNode(0, Role.PIN)]
    for k in range(1, n - 1):
        nodes.append(WNode(k, Role.COMB, kinds[k % 4], 2, 8))
    nodes.append(WNode(n - 1, Role.SINK))
    edges = []
    for v in range(1, n):
        for u in rng.choice(v, size=min(v, 2), replace=False):
            edges.append(WEdge(int(u), v, int(rng.random() < 0.3), 8))
    for _ in range(n // 2):
        u, v = sorted(int(x) for x in rng.choice(np.arange(1, n - 1), size=2, replace=False))
        edges.append(WEdge(v, u, int(rng.integers(1, 3)), 8))
    return WGraph(nodes, edges, "bench")


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _row(name, fn_nb, fn_np, repeat, same):
    a, b = fn_nb(), fn_np()
    assert same(a, b), f"{name}: backends disagree"
    t_nb = _best(fn_nb, repeat)
    t_np = _best(fn_np, repeat)
    print(f"{name:<22} numba {1e3 * t_nb:9.2f} ms   numpy {1e3 * t_np:9.2f} ms   x{t_np / t_nb:7.1f}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cycles", type=int, default=5000)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba disabled; nothing to compare")
        return 0

    g = annotate(_big_graph(args.nodes, seed=1), default_model())
    n = g.n
    src, dst, w, _ = g.arrays()
    delta = g.deltas()
    rank = kernels.zero_topo_rank(n, src, dst, w)
    print(f"graph: {n} nodes, {len(src)} edges")

    def eq(x, y):
        return all(np.array_equal(p, q) for p, q in zip(x, y))

    _row("W/D matrices", lambda: kernels.wd_matrices(n, src, dst, w, delta, rank, use_numba=True),
         lambda: kernels.wd_matrices(n, src, dst, w, delta, rank, use_numba=False), args.repeat, eq)
    _row("zero-weight arrival", lambda: kernels.zero_arrival(n, src, dst, w, delta, rank, use_numba=True),
         lambda: kernels.zero_arrival(n, src, dst, w, delta, rank, use_numba=False), args.repeat,
         lambda x, y: np.array_equal(x, y))

    wd = compute_wd(g)
    cs = build_constraints(g, wd, search_target(g, wd))
    sys_ = diff_system(g, cs, anchored_nodes(g))
    _row("Bellman-Ford", lambda: kernels.bellman_ford(sys_.nv, sys_.head, sys_.tail, sys_.cost, use_numba=True),
         lambda: kernels.bellman_ford(sys_.nv, sys_.head, sys_.tail, sys_.cost, use_numba=False),
         args.repeat, lambda x, y: np.array_equal(x[0], y[0]))

    d = random_design(7, n_ops=60, width=16)
    stims = [random_stimulus(d, args.cycles, k) for k in range(4)]
    _row("simulate 4 stimuli", lambda: simulate_many(d, stims, use_numba=True),
         lambda: simulate_many(d, stims, use_numba=False), args.repeat,
         lambda x, y: all(np.array_equal(np.asarray(p), np.asarray(q)) for p, q in zip(x, y)))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
