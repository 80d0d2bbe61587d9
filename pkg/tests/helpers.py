"""Shared oracles for the test suite."""
from __future__ import annotations

import itertools
import random
from pathlib import Path

import numpy as np

from piperetime.ir import parse_design
from piperetime.wgraph import Role, WGraph

ROOT = Path(__file__).resolve().parents[1]
DESIGNS = ROOT / "benchmarks" / "designs"


def golden_paths():
    return sorted(DESIGNS.glob("*.pipe"))


def load(name: str):
    return parse_design((DESIGNS / f"{name}.pipe").read_text())


# ---------------------------------------------------------------- path oracles

def _adj(g: WGraph):
    out = [[] for _ in range(g.n)]
    for i, e in enumerate(g.edges):
        out[e.src].append(i)
    return out


def simple_paths(g: WGraph, sources, targets, limit=20000):
    """Edge-index lists of simple paths from ``sources`` to ``targets`` (DFS, capped)."""
    adj = _adj(g)
    targets = set(targets)
    found = []
    for s in sources:
        stack = [(s, [], {s})]
        while stack and len(found) < limit:
            v, path, seen = stack.pop()
            if v in targets and path:
                found.append(path)
                continue
            for i in adj[v]:
                u = g.edges[i].dst
                if u not in seen:
                    stack.append((u, path + [i], seen | {u}))
    return found


def sampled_paths(g: WGraph, sources, targets, count, seed=0, max_len=200):
    """Random walks from a source that happen to end at a target."""
    rng = random.Random(seed)
    adj = _adj(g)
    targets = set(targets)
    out = []
    tries = 0
    while len(out) < count and tries < 50 * count:
        tries += 1
        v = rng.choice(sources)
        path, seen = [], {v}
        while len(path) < max_len:
            nxt = [i for i in adj[v] if g.edges[i].dst not in seen]
            if not nxt:
                break
            i = rng.choice(nxt)
            path.append(i)
            v = g.edges[i].dst
            seen.add(v)
            if v in targets:
                out.append(path)
                break
    return out


def simple_cycles(g: WGraph, limit=20000):
    """Edge-index lists of simple directed cycles (each reported once, capped)."""
    adj = _adj(g)
    found = []
    for s in range(g.n):
        stack = [(s, [], {s})]
        while stack and len(found) < limit:
            v, path, seen = stack.pop()
            for i in adj[v]:
                u = g.edges[i].dst
                if u == s:
                    found.append(path + [i])
                elif u > s and u not in seen:
                    stack.append((u, path + [i], seen | {u}))
    return found


def legality_violations(before: WGraph, after: WGraph, exhaustive_limit=20000, samples=1000):
    """Problems with ``after`` as a relocation of ``before`` (same edge order)."""
    errs = []
    if len(before.edges) != len(after.edges):
        return ["edge count changed"]
    for i, e in enumerate(after.edges):
        if e.w < 0:
            errs.append(f"edge {i} negative")
    pins = [nd.id for nd in before.nodes if nd.role is Role.PIN]
    sinks = [nd.id for nd in before.nodes if nd.role is Role.SINK]
    paths = simple_paths(before, pins, sinks, limit=exhaustive_limit)
    if len(paths) >= exhaustive_limit:
        paths = sampled_paths(before, pins, sinks, samples)
    w0 = np.array([e.w for e in before.edges])
    w1 = np.array([e.w for e in after.edges])
    for p in paths:
        if w0[p].sum() != w1[p].sum():
            errs.append(f"path {p} latency {w0[p].sum()} -> {w1[p].sum()}")
    for c in simple_cycles(before, limit=exhaustive_limit):
        if w0[c].sum() != w1[c].sum():
            errs.append(f"cycle {c} weight {w0[c].sum()} -> {w1[c].sum()}")
    return errs


# ---------------------------------------------------------------- timing oracles

def path_enumeration_wd(g: WGraph):
    """W and D by walking every simple path; the empty path gives W=0, D=delta."""
    n = g.n
    INF = None
    W = [[INF] * n for _ in range(n)]
    D = [[0.0] * n for _ in range(n)]
    delta = [nd.delta for nd in g.nodes]
    adj = _adj(g)
    for s in range(n):
        stack = [(s, 0, delta[s], {s})]
        while stack:
            v, w, d, seen = stack.pop()
            if W[s][v] is None or w < W[s][v] or (w == W[s][v] and d > D[s][v]):
                W[s][v], D[s][v] = w, d
            for i in adj[v]:
                e = g.edges[i]
                if e.dst not in seen:
                    stack.append((e.dst, w + e.w, d + delta[e.dst], seen | {e.dst}))
    return W, D


def brute_critical_path(g: WGraph):
    W, D = path_enumeration_wd(g)
    return max(D[u][v] for u in range(g.n) for v in range(g.n) if W[u][v] == 0)


def all_assignments(nv, bound):
    return itertools.product(range(-bound, bound + 1), repeat=nv)
