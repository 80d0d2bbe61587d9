"""Seeded generators of random designs and register graphs for testing."""
from __future__ import annotations

import random

from .ir import Design, OpKind, Operation, canonical_order, validate
from .wgraph import Role, WEdge, WGraph, WNode

_ARITH = [OpKind.ADD, OpKind.SUB, OpKind.MUL, OpKind.AND, OpKind.OR, OpKind.XOR]


def random_design(seed: int, n_ops: int | None = None, width: int | None = None,
                  name: str | None = None) -> Design:
    """A valid design with feedback through delays, fan-out of delayed values,
    constants, muxes and bit slicing."""
    rng = random.Random(seed)
    for attempt in range(100):
        d = _attempt(rng, n_ops, width, name or f"fuzz{seed}")
        if not validate(d):
            return Design(d.name, canonical_order(d))
    raise RuntimeError("generator failed to produce a valid design")


def _attempt(rng, n_ops, width, name):
    W = width or rng.choice([4, 8, 8, 16])
    n_ops = n_ops or rng.randint(4, 14)
    ops: list[Operation] = []
    pool: list[tuple[str, int]] = []
    counter = [0]

    def fresh(prefix):
        counter[0] += 1
        return f"%{prefix}{counter[0]}"

    for _ in range(rng.randint(1, 3)):
        v = fresh("in")
        ops.append(Operation(OpKind.PIN, v, [], {}, W))
        pool.append((v, W))
    feedback = []
    for _ in range(rng.randint(0, 2)):
        v = fresh("fb")
        feedback.append((v, rng.randint(1, 2)))
        pool.append((v, W))

    def pick(width=W):
        cands = [v for v, w in pool if w == width]
        return rng.choice(cands) if cands else None

    for _ in range(n_ops):
        r = rng.random()
        if r < 0.45:
            kind = rng.choice(_ARITH)
            k = 2 if rng.random() < 0.85 else 3
            args = [pick() for _ in range(k)]
            v = fresh("v")
            ops.append(Operation(kind, v, args, {}, W))
        elif r < 0.65:
            src = pick()
            v = fresh("d")
            ops.append(Operation(OpKind.DELAY, v, [src], {"delay": rng.randint(1, 2)}, W))
        elif r < 0.72:
            v = fresh("c")
            val = 0 if rng.random() < 0.4 else rng.randrange(1, 1 << W)
            ops.append(Operation(OpKind.CONST, v, [], {"value": val}, W))
        elif r < 0.78:
            v = fresh("n")
            ops.append(Operation(OpKind.NOT, v, [pick()], {}, W))
        elif r < 0.88:
            sel = fresh("s")
            ops.append(Operation(OpKind.EXTRACT, sel, [pick()], {"low": rng.randrange(W), "width": 1}, 1))
            pool.append((sel, 1))
            v = fresh("m")
            ops.append(Operation(OpKind.MUX, v, [sel, pick(), pick()], {}, W))
        else:
            half = W // 2
            a, b = fresh("lo"), fresh("hi")
            src = pick()
            ops.append(Operation(OpKind.EXTRACT, a, [src], {"low": 0, "width": half}, half))
            ops.append(Operation(OpKind.EXTRACT, b, [pick()], {"low": half, "width": W - half}, W - half))
            v = fresh("cc")
            ops.append(Operation(OpKind.CONCAT, v, [b, a], {}, W))
        pool.append((v, W))

    body = [v for v, w in pool if w == W and not v.startswith("%in") and not v.startswith("%fb")]
    for fb, k in feedback:
        src = rng.choice(body) if body else pick()
        ops.append(Operation(OpKind.DELAY, fb, [src], {"delay": k}, W))
    # sinks observe the last values plus a few random ones
    outs = body[-2:] + rng.sample(body, min(len(body), rng.randint(0, 2)))
    outs = list(dict.fromkeys(outs)) or [pool[0][0]]
    split = rng.randint(1, len(outs))
    for group in (outs[:split], outs[split:]):
        if group:
            ops.append(Operation(OpKind.SINK, None, group, {"widths": [W] * len(group)}))
    return Design(name, ops)


def random_graph(seed: int, max_nodes: int = 10, max_edges: int = 18,
                 weights=(0, 1, 2), betas=(1, 4, 8)) -> WGraph:
    """A register graph in which every node lies on some pin-to-sink path."""
    rng = random.Random(seed)
    while True:
        g = _graph_attempt(rng, max_nodes, max_edges, weights, betas)
        if len(g.edges) <= max_edges:
            g.design_name = f"g{seed}"
            return g


def _graph_attempt(rng, max_nodes, max_edges, weights, betas):
    n = rng.randint(4, max_nodes)
    n_pin = rng.randint(1, 2)
    n_sink = rng.randint(1, 2)
    n_comb = max(1, n - n_pin - n_sink)
    nodes = []
    for _ in range(n_pin):
        nodes.append(WNode(len(nodes), Role.PIN))
    kinds = [OpKind.ADD, OpKind.ADD, OpKind.MUL, OpKind.XOR, OpKind.SUB]
    for _ in range(n_comb):
        nodes.append(WNode(len(nodes), Role.COMB, rng.choice(kinds), 2, 8,
                           delta=float(rng.choice([10, 20, 30, 50, 70, 120]))))
    for _ in range(n_sink):
        nodes.append(WNode(len(nodes), Role.SINK))
    pins = list(range(n_pin))
    combs = list(range(n_pin, n_pin + n_comb))
    sinks = list(range(n_pin + n_comb, len(nodes)))
    edges: list[WEdge] = []

    def add(u, v, back=False):
        w = rng.choice([x for x in weights if x > 0]) if back else rng.choice(weights)
        edges.append(WEdge(u, v, w, rng.choice(betas)))

    # spine: every comb node gets an earlier driver and a later consumer
    for i, c in enumerate(combs):
        add(rng.choice(pins + combs[:i]), c)
    for i, c in enumerate(combs):
        later = combs[i + 1:] + sinks
        if not any(e.src == c for e in edges):
            add(c, rng.choice(later))
    for s in sinks:
        if not any(e.dst == s for e in edges):
            add(rng.choice(combs), s)
    for p in pins:
        if not any(e.src == p for e in edges):
            add(p, rng.choice(combs))
    order = {v: k for k, v in enumerate(pins + combs + sinks)}
    while len(edges) < max_edges and rng.random() < 0.8:
        u = rng.choice(pins + combs)
        v = rng.choice(combs + sinks)
        if u == v:
            continue
        add(u, v, back=order[v] <= order[u])
    return WGraph(nodes, edges)
