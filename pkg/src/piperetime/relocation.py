"""Global register relocation.

The integer program

    minimize    sum_v ds(v) * wt(v),   wt(v) = sum(in beta) - sum(out beta)
    subject to  w(e) + ds(v) - ds(u) >= 0        for every edge u -> v
                W(u,v) + ds(v) - ds(u) >= 1      for every timing pair
                ds(b) = 0                         for anchored nodes

has a totally unimodular constraint matrix; its dual is a min-cost flow.  The
flow is solved here with successive shortest paths and the stage potentials
are read back from the node prices.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .timing import (DiffSystem, TimingConstraintSet, anchored_nodes, diff_system,
                     solve_difference)
from .wgraph import WGraph

log = logging.getLogger(__name__)


class Infeasible(RuntimeError):
    def __init__(self, certificate):
        self.certificate = certificate
        super().__init__(f"relocation constraints are infeasible; cycle: {certificate}")


class LegalityViolation(ValueError):
    pass


class InstanceTooLarge(ValueError):
    pass


@dataclass
class RelocationProblem:
    graph: WGraph
    constraints: TimingConstraintSet | None
    node_weight: np.ndarray
    boundary: frozenset
    system: DiffSystem


@dataclass
class RelocationSolution:
    delta_s: np.ndarray
    objective: int
    target: float | None
    stats: dict | None = None

    def l1(self) -> int:
        return int(np.abs(self.delta_s).sum())


def node_weights(g: WGraph) -> np.ndarray:
    wt = np.zeros(g.n, dtype=np.int64)
    for e in g.edges:
        wt[e.dst] += e.beta
        wt[e.src] -= e.beta
    return wt


def build_problem(g: WGraph, cs: TimingConstraintSet | None, anchored=None) -> RelocationProblem:
    anchored = frozenset(anchored_nodes(g) if anchored is None else anchored)
    return RelocationProblem(g, cs, node_weights(g), anchored, diff_system(g, cs, anchored))


# ---------------------------------------------------------------------- min-cost flow

class _Net:
    """Residual network stored as parallel lists; arc i and i ^ 1 are mates."""

    def __init__(self, n):
        self.n = n
        self.head: list[int] = []
        self.cap: list[int] = []
        self.cost: list[int] = []
        self.adj: list[list[int]] = [[] for _ in range(n)]

    def add(self, u, v, cap, cost):
        self.adj[u].append(len(self.head))
        self.head.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.adj[v].append(len(self.head))
        self.head.append(u)
        self.cap.append(0)
        self.cost.append(-cost)

    def tail(self, i):
        return self.head[i ^ 1]

    def dijkstra(self, sources, pi):
        """Reduced-cost shortest paths from a set of zero-distance sources."""
        n = self.n
        dist = [None] * n
        parent = [-1] * n
        heap = [(0, s) for s in sources]
        for s in sources:
            dist[s] = 0
        heapq.heapify(heap)
        done = [False] * n
        order = []
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            order.append(u)
            pu = pi[u]
            for i in self.adj[u]:
                if self.cap[i] <= 0:
                    continue
                v = self.head[i]
                if done[v]:
                    continue
                nd = d + self.cost[i] + pu - pi[v]
                if dist[v] is None or nd < dist[v]:
                    dist[v] = nd
                    parent[v] = i
                    heapq.heappush(heap, (nd, v))
        return dist, parent, order


def _min_cost_flow(net: _Net, supply: list[int], pi: list[int]) -> dict:
    """Route ``supply`` (positive = source) to zero with reduced costs kept non-negative."""
    stats = {"augmentations": 0, "dijkstra_runs": 0}
    supply = list(supply)
    while True:
        sources = [v for v in range(net.n) if supply[v] > 0]
        if not sources:
            break
        dist, parent, order = net.dijkstra(sources, pi)
        stats["dijkstra_runs"] += 1
        sinks = [v for v in order if supply[v] < 0]
        if not sinks:
            raise Infeasible(["flow network cannot route supply"])
        t = sinks[0]
        dt = dist[t]
        for v in range(net.n):
            if dist[v] is not None:
                pi[v] += min(dist[v], dt)
            else:
                pi[v] += dt
        # bottleneck along the tree path
        path = []
        v = t
        while parent[v] >= 0:
            path.append(parent[v])
            v = net.tail(parent[v])
        s = v
        amount = min(supply[s], -supply[t])
        for i in path:
            amount = min(amount, net.cap[i])
        for i in path:
            net.cap[i] -= amount
            net.cap[i ^ 1] += amount
        supply[s] -= amount
        supply[t] += amount
        stats["augmentations"] += 1
    return stats


def solve(p: RelocationProblem, use_numba=None) -> RelocationSolution:
    """Optimal stage potentials.

    Among optima the one with the smallest sum of |ds| is returned, and among
    those the componentwise (hence lexicographically) smallest vector.
    """
    ds = p.system
    feas = solve_difference(ds, use_numba)
    if not feas:
        raise Infeasible(feas.violation)
    nv = ds.nv
    g = p.graph
    b = np.zeros(nv, dtype=object)
    for v in range(g.n):
        k = int(ds.var_of[v])
        if k:
            b[k] += int(p.node_weight[v])
    b[0] = -sum(b[1:])
    span = int(np.abs(ds.cost).sum()) if ds.cost.size else 0
    M = 1 + nv * (span + 1)
    total = int(sum(abs(int(x)) for x in b)) * M + 2 * nv
    big = total + 1

    net = _Net(nv)
    for t, h, c in zip(ds.tail.tolist(), ds.head.tolist(), ds.cost.tolist()):
        net.add(t, h, big, c)
    for k in range(1, nv):
        net.add(0, k, 1, 0)
        net.add(k, 0, 1, 0)

    # inflow - outflow = M * b  ->  supply = -M * b
    supply = [-M * int(x) for x in b]
    # prices from the feasible witness: x = -pi satisfies every constraint arc
    x0 = np.zeros(nv, dtype=np.int64)
    for v in range(g.n):
        x0[ds.var_of[v]] = feas.witness[v]
    pi = [-int(x) for x in x0]
    # saturate penalty arcs with negative reduced cost
    for i in range(0, len(net.head), 2):
        if net.cap[i] == 1 and net.cost[i] + pi[net.tail(i)] - pi[net.head[i]] < 0:
            u, v = net.tail(i), net.head[i]
            net.cap[i] -= 1
            net.cap[i ^ 1] += 1
            supply[u] -= 1
            supply[v] += 1
    stats = _min_cost_flow(net, supply, pi)

    # smallest x on the optimal face: x_v = -(shortest residual path 0 -> v)
    dist, _, _ = net.dijkstra([0], pi)
    x = np.zeros(nv, dtype=np.int64)
    for v in range(nv):
        if dist[v] is None:
            x[v] = -pi[v] + pi[0]
        else:
            x[v] = -(dist[v] + pi[v] - pi[0])
    delta = x[ds.var_of]
    delta[list(p.boundary)] = 0
    obj = int(np.dot(delta, p.node_weight))
    stats.update(variables=nv - 1, constraints=int(ds.tail.size), scale=M)
    target = p.constraints.target if p.constraints is not None else None
    return RelocationSolution(delta.astype(np.int64), obj, target, stats)


# ---------------------------------------------------------------------- exhaustive oracle

def closure_matrix(ds: DiffSystem) -> np.ndarray | None:
    """Tightest implied bound on x[j] - x[i]; None when the system is infeasible."""
    big = kernels.INF_W
    C = np.full((ds.nv, ds.nv), big, dtype=np.int64)
    np.fill_diagonal(C, 0)
    for t, h, c in zip(ds.tail, ds.head, ds.cost):
        C[h, t] = min(C[h, t], c)
    for k in range(ds.nv):
        via = C[:, k:k + 1] + C[k:k + 1, :]
        via = np.where((C[:, k:k + 1] < big) & (C[k:k + 1, :] < big), via, big)
        C = np.minimum(C, via)
    if (np.diag(C) < 0).any():
        return None
    return C


def brute_force_solve(p: RelocationProblem, bound: int | None = None,
                      max_nodes: int = 12, use_numba=None) -> RelocationSolution:
    """Enumerate every integer assignment in [-bound, bound]; for tests only."""
    if p.graph.n > max_nodes:
        raise InstanceTooLarge(f"{p.graph.n} nodes exceeds the oracle limit of {max_nodes}")
    if bound is None:
        bound = sum(e.w for e in p.graph.edges)
    ds = p.system
    if ds.trivially_violated:
        raise Infeasible(ds.trivially_violated)
    C = closure_matrix(ds)
    if C is None:
        raise Infeasible(["closure has a negative diagonal"])
    wt = np.zeros(ds.nv, dtype=np.int64)
    for v in range(p.graph.n):
        wt[ds.var_of[v]] += p.node_weight[v]
    found, best, _, visited = kernels.enumerate_optimum(ds.nv, C, wt, bound, use_numba)
    if not found:
        raise Infeasible(["no assignment within bound"])
    delta = best[ds.var_of].astype(np.int64)
    delta[list(p.boundary)] = 0
    obj = int(np.dot(delta, p.node_weight))
    target = p.constraints.target if p.constraints is not None else None
    return RelocationSolution(delta, obj, target, {"visited": visited})


# ---------------------------------------------------------------------- application

def apply(g: WGraph, s: RelocationSolution) -> WGraph:
    out = g.copy()
    d = s.delta_s
    for e in out.edges:
        e.w = int(e.w + d[e.dst] - d[e.src])
        if e.w < 0:
            raise LegalityViolation(f"edge {e.src}->{e.dst} would carry {e.w} registers")
    return out


def dump_solution(g: WGraph, s: RelocationSolution) -> str:
    deltas = " ".join(f"{v}={int(x)}" for v, x in enumerate(s.delta_s))
    return g.dump() + f"deltas: {deltas}\n"


def parse_deltas(text: str) -> np.ndarray:
    for line in text.splitlines():
        if line.startswith("deltas:"):
            pairs = [tok.split("=") for tok in line[len("deltas:"):].split()]
            arr = np.zeros(len(pairs), dtype=np.int64)
            for k, v in pairs:
                arr[int(k)] = int(v)
            return arr
    raise ValueError("no deltas line")
