"""Path-delay analysis over an annotated register graph.

Covers the zero-register critical path, the all-pairs W/D matrices, the timing
constraint set for a target delay, difference-constraint feasibility and the
search for the tightest feasible target.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ir import OpKind
from .wgraph import Role, WGraph

log = logging.getLogger(__name__)

INF_W = int(kernels.INF_W)


class CombinationalCycleError(ValueError):
    pass


def anchored_nodes(g: WGraph) -> list[int]:
    """Nodes whose stage potential is fixed at zero.

    Pins and sinks anchor latency.  Nodes that map all-zero inputs to a non-zero
    output (non-zero constants, bitwise not) are anchored as well: registers
    start at zero, and moving one across such a node would change the reset
    state of the machine.
    """
    out = []
    for nd in g.nodes:
        if nd.is_boundary:
            out.append(nd.id)
        elif nd.role is Role.COMB and not zero_preserving(nd):
            out.append(nd.id)
    return out


def zero_preserving(nd) -> bool:
    if nd.kind is OpKind.NOT:
        return False
    if nd.kind is OpKind.CONST:
        return int(nd.attrs.get("value", 0)) % (1 << nd.width) == 0
    return True


def _ranked(g: WGraph):
    src, dst, w, _ = g.arrays()
    rank = kernels.zero_topo_rank(g.n, src, dst, w)
    if rank is None:
        raise CombinationalCycleError("graph has a cycle with zero registers")
    return src, dst, w, rank


def critical_path(g: WGraph, use_numba=None) -> tuple[float, list[int]]:
    """Largest delay sum over zero-register paths, with one witness path."""
    if g.n == 0:
        return 0.0, []
    src, dst, w, rank = _ranked(g)
    arrival, pred = kernels.zero_arrival(g.n, src, dst, w, g.deltas(), rank, use_numba)
    end = int(np.argmax(arrival))
    path = [end]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return float(arrival[end]), path[::-1]


@dataclass
class WDMatrices:
    W: np.ndarray
    D: np.ndarray

    def reachable(self) -> np.ndarray:
        return self.W < INF_W

    def get(self, u: int, v: int):
        if self.W[u, v] >= INF_W:
            return None
        return int(self.W[u, v]), float(self.D[u, v])

    def zero_register_max(self) -> float:
        """Largest D over register-free pairs (the critical path in matrix terms)."""
        if self.W.size == 0:
            return 0.0
        return float(self.D[self.W == 0].max())


def compute_wd(g: WGraph, use_numba=None) -> WDMatrices:
    src, dst, w, rank = _ranked(g)
    W, D = kernels.wd_matrices(g.n, src, dst, w, g.deltas(), rank, use_numba)
    return WDMatrices(W, D)


@dataclass
class TimingConstraintSet:
    pairs: list[tuple[int, int, int]]
    target: float

    def __len__(self) -> int:
        return len(self.pairs)


def build_constraints(g: WGraph, wd: WDMatrices, target: float) -> TimingConstraintSet:
    """All reachable pairs whose register-minimal delay exceeds ``target``."""
    mask = wd.reachable() & (wd.D > target)
    us, vs = np.nonzero(mask)
    pairs = [(int(u), int(v), int(wd.W[u, v])) for u, v in zip(us, vs)]
    return TimingConstraintSet(pairs, float(target))


# ---------------------------------------------------------------------- difference constraints

@dataclass
class DiffSystem:
    """Constraints x[tail] - x[head] <= cost over merged variables.

    Variable 0 stands for every anchored node (value 0).  ``origin`` tags each
    constraint with ("edge", edge_index) or ("timing", pair_index).
    """
    nv: int
    var_of: np.ndarray
    tail: np.ndarray
    head: np.ndarray
    cost: np.ndarray
    origin: list = field(default_factory=list)
    trivially_violated: list = field(default_factory=list)


def diff_system(g: WGraph, cs: TimingConstraintSet | None, anchored=None) -> DiffSystem:
    anchored = set(anchored_nodes(g) if anchored is None else anchored)
    var_of = np.zeros(g.n, dtype=np.int64)
    k = 1
    for nd in g.nodes:
        if nd.id not in anchored:
            var_of[nd.id] = k
            k += 1
    tail, head, cost, origin, bad = [], [], [], [], []

    def add(u, v, c, tag):
        a, b = int(var_of[u]), int(var_of[v])
        if a == b:
            if c < 0:
                bad.append(tag)
            return
        tail.append(a)
        head.append(b)
        cost.append(c)
        origin.append(tag)

    for i, e in enumerate(g.edges):
        add(e.src, e.dst, e.w, ("edge", i))
    if cs is not None:
        for j, (u, v, W) in enumerate(cs.pairs):
            add(u, v, W - 1, ("timing", j))
    return DiffSystem(k, var_of, np.array(tail, dtype=np.int64), np.array(head, dtype=np.int64),
                      np.array(cost, dtype=np.int64), origin, bad)


@dataclass
class FeasibilityResult:
    feasible: bool
    witness: np.ndarray | None = None
    violation: list | None = None

    def __bool__(self) -> bool:
        return self.feasible


def solve_difference(ds: DiffSystem, use_numba=None) -> FeasibilityResult:
    if ds.trivially_violated:
        return FeasibilityResult(False, None, [ds.trivially_violated[0]])
    # x[tail] <= x[head] + cost  ->  relaxation arc head -> tail
    dist, pred, last = kernels.bellman_ford(ds.nv, ds.head, ds.tail, ds.cost, use_numba)
    if last >= 0:
        cyc = kernels.negative_cycle(ds.nv, ds.head, ds.tail, ds.cost, pred, last)
        if cyc is None:
            cyc = kernels.find_negative_cycle(ds.nv, ds.head, ds.tail, ds.cost)
        return FeasibilityResult(False, None, [ds.origin[i] for i in cyc] if cyc else [])
    x = dist - dist[0]
    return FeasibilityResult(True, x[ds.var_of], None)


def check_feasibility(g: WGraph, cs: TimingConstraintSet, anchored=None,
                      use_numba=None) -> FeasibilityResult:
    """Legal stage assignment meeting ``cs``, or a negative-cycle certificate.

    The witness is indexed by node id and is zero on anchored nodes.
    """
    return solve_difference(diff_system(g, cs, anchored), use_numba)


def candidate_targets(wd: WDMatrices) -> np.ndarray:
    top = wd.zero_register_max()
    vals = wd.D[wd.reachable()]
    return np.unique(vals[vals <= top])


def search_target(g: WGraph, wd: WDMatrices, anchored=None, use_numba=None) -> float:
    """Smallest feasible candidate target (binary search over sorted D values)."""
    if g.n == 0:
        return 0.0
    cands = candidate_targets(wd)
    lo, hi = 0, len(cands) - 1
    probes = 0
    while lo < hi:
        mid = (lo + hi) // 2
        probes += 1
        if check_feasibility(g, build_constraints(g, wd, cands[mid]), anchored, use_numba):
            hi = mid
        else:
            lo = mid + 1
    log.debug("target search: %d candidates, %d probes, T=%g", len(cands), probes, cands[lo])
    return float(cands[lo])
