"""Weighted register graph built from a design.

Every node is a combinational op, a pin, a sink or a bubble.  An edge carries
``w`` (registers on the dependency) and ``beta`` (bit width of the value).
Delay ops disappear into edge weights.  A delayed value that fans out to two
or more uses gets a bubble node so the shared register chain is counted once.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .ir import (Design, Diagnostic, OpKind, Operation, ValidationError, canonical_order,
                 validate)

log = logging.getLogger(__name__)


class Role(enum.Enum):
    COMB = "comb"
    PIN = "pin"
    SINK = "sink"
    BUBBLE = "bubble"


@dataclass
class WNode:
    id: int
    role: Role
    kind: OpKind | None = None
    operand_count: int = 0
    width: int = 0
    delta: float = 0.0
    origin: str | None = None
    attrs: dict = field(default_factory=dict)

    @property
    def is_boundary(self) -> bool:
        return self.role in (Role.PIN, Role.SINK)


@dataclass
class WEdge:
    src: int
    dst: int
    w: int
    beta: int
    slot: int = 0
    origin: str | None = None


@dataclass
class WGraph:
    nodes: list[WNode]
    edges: list[WEdge]
    design_name: str = "design"

    def copy(self) -> "WGraph":
        return WGraph([replace(n, attrs=dict(n.attrs)) for n in self.nodes],
                      [replace(e) for e in self.edges], self.design_name)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def arrays(self):
        """(src, dst, w, beta) as int64 arrays."""
        src = np.array([e.src for e in self.edges], dtype=np.int64)
        dst = np.array([e.dst for e in self.edges], dtype=np.int64)
        w = np.array([e.w for e in self.edges], dtype=np.int64)
        beta = np.array([e.beta for e in self.edges], dtype=np.int64)
        return src, dst, w, beta

    def deltas(self) -> np.ndarray:
        return np.array([nd.delta for nd in self.nodes], dtype=np.float64)

    def in_edges(self) -> list[list[WEdge]]:
        out: list[list[WEdge]] = [[] for _ in self.nodes]
        for e in self.edges:
            out[e.dst].append(e)
        return out

    def out_edges(self) -> list[list[WEdge]]:
        out: list[list[WEdge]] = [[] for _ in self.nodes]
        for e in self.edges:
            out[e.src].append(e)
        return out

    def boundary(self) -> list[int]:
        return [nd.id for nd in self.nodes if nd.is_boundary]

    def check(self) -> list[str]:
        """Structural invariant violations (empty when the graph is well formed)."""
        errs = []
        ins, outs = self.in_edges(), self.out_edges()
        for nd in self.nodes:
            if nd.delta < 0:
                errs.append(f"node {nd.id} has negative delay")
            if nd.role is Role.PIN and ins[nd.id]:
                errs.append(f"pin {nd.id} has in-edges")
            if nd.role is Role.SINK and outs[nd.id]:
                errs.append(f"sink {nd.id} has out-edges")
            if nd.role is Role.BUBBLE and (len(ins[nd.id]) != 1 or len(outs[nd.id]) < 2):
                errs.append(f"bubble {nd.id} needs one in-edge and >= 2 out-edges")
        for e in self.edges:
            if e.w < 0:
                errs.append(f"edge {e.src}->{e.dst} has negative weight {e.w}")
        if zero_weight_cycle(self):
            errs.append("cycle with zero registers")
        return errs

    def dump(self) -> str:
        lines = [f"node {nd.id} {_role_label(nd)} delta={nd.delta:g}" for nd in self.nodes]
        lines += [f"edge {e.src} {e.dst} w={e.w} beta={e.beta}" for e in self.edges]
        return "\n".join(lines) + "\n"


def _role_label(nd: WNode) -> str:
    if nd.role is Role.COMB:
        return f"comb:{nd.kind.value}/{nd.operand_count}/i{nd.width}"
    return nd.role.value


def parse_dump(text: str) -> WGraph:
    """Inverse of ``WGraph.dump`` (node roles, weights and delays only)."""
    nodes, edges = [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "node":
            nid, label, delta = int(parts[1]), parts[2], float(parts[3].split("=")[1])
            if label.startswith("comb:"):
                kind, cnt, width = label[5:].split("/")
                nodes.append(WNode(nid, Role.COMB, OpKind(kind), int(cnt), int(width[1:]), delta))
            else:
                nodes.append(WNode(nid, Role(label), delta=delta))
        elif parts[0] == "edge":
            w = int(parts[3].split("=")[1])
            beta = int(parts[4].split("=")[1])
            edges.append(WEdge(int(parts[1]), int(parts[2]), w, beta))
    return WGraph(nodes, edges)


def zero_weight_cycle(g: WGraph) -> bool:
    indeg = [0] * g.n
    succ: list[list[int]] = [[] for _ in range(g.n)]
    for e in g.edges:
        if e.w == 0:
            succ[e.src].append(e.dst)
            indeg[e.dst] += 1
    stack = [v for v in range(g.n) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for u in succ[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                stack.append(u)
    return seen != g.n


# --------------------------------------------------------------------------- construction

def build_wgraph(d: Design) -> WGraph:
    diags = validate(d)
    if diags:
        raise ValidationError(diags)
    nodes: list[WNode] = []
    node_of: dict[str, int] = {}
    op_node: dict[int, int] = {}
    for i, op in enumerate(d.ops):
        if op.kind is OpKind.DELAY:
            continue
        nid = len(nodes)
        if op.kind is OpKind.PIN:
            nd = WNode(nid, Role.PIN, width=op.width, origin=op.result)
        elif op.kind is OpKind.SINK:
            nd = WNode(nid, Role.SINK, operand_count=len(op.operands), origin=None)
        elif op.kind is OpKind.BUBBLE:
            nd = WNode(nid, Role.BUBBLE, width=op.width, origin=op.result)
        else:
            nd = WNode(nid, Role.COMB, op.kind, len(op.operands), op.width, origin=op.result,
                       attrs=dict(op.attrs))
        nodes.append(nd)
        op_node[i] = nid
        if op.result is not None:
            node_of[op.result] = nid

    uses = _live_uses(d)
    widths = d.widths()
    edges: list[WEdge] = []

    rings = _register_rings(d, uses)
    ring_node: dict[str, int] = {}
    for rep in rings:
        nid = len(nodes)
        nodes.append(WNode(nid, Role.BUBBLE, width=widths[rep], origin=rep))
        ring_node[rep] = nid

    def place(src: int, acc: int, value: str, origin: str | None):
        us = uses.get(value, [])
        beta = widths[value]
        if not us:
            if acc:
                log.debug("dropping unused delay chain ending at %s", value)
            return
        if acc and len(us) >= 2:
            bub = len(nodes)
            nodes.append(WNode(bub, Role.BUBBLE, width=beta, origin=value))
            edges.append(WEdge(src, bub, acc, beta, 0, origin))
            src, acc, origin = bub, 0, None
        for i, slot in us:
            op = d.ops[i]
            if op.kind is OpKind.DELAY:
                k = acc + op.attrs["delay"]
                if op.result in ring_node:
                    # closing a register ring
                    edges.append(WEdge(src, ring_node[op.result], k, beta, 0, op.result))
                else:
                    place(src, k, op.result, op.result)
            else:
                edges.append(WEdge(src, op_node[i], acc, beta, slot, origin if acc else None))

    for i, op in enumerate(d.ops):
        if op.result is not None and op.kind is not OpKind.DELAY:
            place(op_node[i], 0, op.result, None)
    for rep, nid in ring_node.items():
        place(nid, 0, rep, None)
    return WGraph(nodes, edges, d.name)


def _live_uses(d: Design) -> dict[str, list[tuple[int, int]]]:
    """Uses of each value, ignoring delay chains that nothing reads."""
    defs = d.defs()
    live: set[str] = set()
    stack = [v for op in d.ops if op.kind is not OpKind.DELAY for v in op.operands]
    while stack:
        v = stack.pop()
        if v in live:
            continue
        live.add(v)
        if defs[v].kind is OpKind.DELAY:
            stack.append(defs[v].operands[0])
    uses: dict[str, list[tuple[int, int]]] = {}
    for i, op in enumerate(d.ops):
        if op.kind is OpKind.DELAY and op.result not in live:
            continue
        for slot, v in enumerate(op.operands):
            uses.setdefault(v, []).append((i, slot))
    return uses


def _register_rings(d: Design, uses) -> list[str]:
    """Representatives of live cycles made only of delay ops.

    Such a ring has no combinational producer; it is modelled by a bubble node
    placed at a ring value that fans out.  Rings nobody reads are dropped.
    """
    defs = d.defs()
    state: dict[str, int] = {}
    reps = []
    order = {op.result: i for i, op in enumerate(d.ops) if op.result}
    for op in d.ops:
        if op.kind is not OpKind.DELAY or op.result in state:
            continue
        trail = []
        v = op.result
        while v in defs and defs[v].kind is OpKind.DELAY and v not in state:
            state[v] = 1
            trail.append(v)
            v = defs[v].operands[0]
        if v in trail:
            cyc = trail[trail.index(v):]
            fan = [c for c in cyc if len(uses.get(c, [])) >= 2]
            if fan:
                reps.append(min(fan, key=order.get))
            else:
                log.debug("dropping register ring without readers: %s", ", ".join(cyc))
        for t in trail:
            state[t] = 2
    return reps


def capacity(g: WGraph) -> tuple[int, int]:
    """(register count, register bits); a bubble in-edge counts its chain once."""
    regs = sum(e.w for e in g.edges)
    bits = sum(e.w * e.beta for e in g.edges)
    return regs, bits


def blackbox_boundaries(d: Design, blackbox_values) -> Design:
    """Cut black-box values out of ``d``.

    Each listed value's defining op is replaced by a pin of the same width and
    its operands are routed to a new sink.  Logic left without a path to any
    sink is kept; ``disconnected_values`` reports it.
    """
    blackbox_values = list(blackbox_values)
    defs = d.defs()
    missing = [v for v in blackbox_values if v not in defs]
    if missing:
        raise KeyError(f"black-box values not found: {', '.join(missing)}")
    if not blackbox_values:
        return d
    ops = []
    for op in d.ops:
        if op.result in blackbox_values:
            if op.kind is OpKind.PIN:
                ops.append(op)
                continue
            ops.append(Operation(OpKind.PIN, op.result, [], {}, op.width))
            if op.operands:
                ws = [defs[v].width for v in op.operands]
                ops.append(Operation(OpKind.SINK, None, list(op.operands), {"widths": ws}))
        else:
            ops.append(op)
    out = Design(d.name, ops)
    for dg in disconnected_values(out):
        log.warning("%s", dg)
    return out


def disconnected_values(d: Design) -> list[Diagnostic]:
    """Values that cannot reach any sink."""
    defs = d.defs()
    preds: dict[str, list[str]] = {}
    for op in d.ops:
        if op.result is not None:
            preds[op.result] = list(op.operands)
    live = set()
    stack = [v for op in d.sinks() for v in op.operands]
    while stack:
        v = stack.pop()
        if v in live or v not in defs:
            continue
        live.add(v)
        stack.extend(preds.get(v, []))
    return [Diagnostic("Disconnected", v, "value does not reach any sink")
            for v in defs if v not in live]


# --------------------------------------------------------------------------- graph -> design

def _sanitize(name: str) -> str:
    return name.lstrip("%")


def wgraph_to_design(g: WGraph) -> Design:
    return lower_graph(g)[0]


def lower_graph(g: WGraph) -> tuple[Design, dict]:
    """Materialize ``g`` as a design.

    Positive edges become ``delay`` ops (one per edge).  A bubble whose in-edge
    carries registers becomes one shared ``delay``; a bubble with no registers
    on any incident edge is dropped and its users rewired to the producer; any
    other bubble stays an explicit ``bubble`` op.
    """
    errs = [e for e in g.check() if "bubble" in e or "negative" in e]
    if errs:
        raise ValueError("malformed graph: " + "; ".join(errs))
    ins, outs = g.in_edges(), g.out_edges()
    stats = {"delays_emitted": 0, "bubbles_elided": 0}
    taken = {nd.origin for nd in g.nodes if nd.origin}
    taken |= {e.origin for e in g.edges if e.origin}

    def fresh(base: str) -> str:
        name, k = base, 1
        while name in taken:
            k += 1
            name = f"{base}_{k}"
        taken.add(name)
        return name

    # names first, so rings of bubbles and delays need no recursion
    status: dict[int, str] = {}
    names: dict[int, str] = {}
    for nd in g.nodes:
        if nd.role is Role.BUBBLE:
            (e_in,) = ins[nd.id]
            if e_in.w > 0:
                status[nd.id] = "delay"
                names[nd.id] = nd.origin or e_in.origin or fresh(f"%b{nd.id}")
            elif all(e.w == 0 for e in outs[nd.id]):
                status[nd.id] = "elided"
                stats["bubbles_elided"] += 1
            else:
                status[nd.id] = "bubble"
                names[nd.id] = nd.origin or fresh(f"%b{nd.id}")
        elif nd.role is not Role.SINK:
            names[nd.id] = nd.origin or fresh(f"%n{nd.id}")

    def value_of(nid: int) -> str:
        while status.get(nid) == "elided":
            nid = ins[nid][0].src
        return names[nid]

    sink_index = {nd.id: k for k, nd in enumerate(n for n in g.nodes if n.role is Role.SINK)}

    def label(nid: int) -> str:
        if nid in sink_index:
            return f"out{sink_index[nid]}"
        return _sanitize(value_of(nid))

    emitted: list[Operation] = []
    placed: set[int] = set()

    def emit_bubble(nid: int) -> None:
        if nid in placed or status.get(nid) in (None, "elided"):
            return
        placed.add(nid)
        (e_in,) = ins[nid]
        src = value_of(e_in.src)
        if status[nid] == "delay":
            emitted.append(Operation(OpKind.DELAY, names[nid], [src], {"delay": e_in.w}, e_in.beta))
            stats["delays_emitted"] += 1
        else:
            emitted.append(Operation(OpKind.BUBBLE, names[nid], [src], {}, e_in.beta))

    def delivered(e: WEdge) -> str:
        src = e.src
        while status.get(src) == "elided":
            src = ins[src][0].src
        emit_bubble(src)
        v = value_of(src)
        if e.w > 0:
            name = e.origin or fresh(f"%{_sanitize(v)}_r{e.w}_{label(e.dst)}")
            emitted.append(Operation(OpKind.DELAY, name, [v], {"delay": e.w}, e.beta))
            stats["delays_emitted"] += 1
            v = name
        return v

    # node order; each delay goes right before its first consumer
    for nd in g.nodes:
        if nd.role is Role.BUBBLE:
            continue
        ordered = sorted(ins[nd.id], key=lambda e: e.slot)
        operands = [delivered(e) for e in ordered]
        if nd.role is Role.PIN:
            emitted.append(Operation(OpKind.PIN, names[nd.id], [], {}, nd.width))
        elif nd.role is Role.SINK:
            emitted.append(Operation(OpKind.SINK, None, operands, {"widths": [e.beta for e in ordered]}))
        else:
            emitted.append(Operation(nd.kind, names[nd.id], operands, dict(nd.attrs), nd.width))
    # bubbles only read by other bubbles (register rings, bubble chains)
    for nd in g.nodes:
        if nd.role is Role.BUBBLE:
            emit_bubble(nd.id)
    return Design(g.design_name, canonical_order(Design(g.design_name, emitted))), stats
