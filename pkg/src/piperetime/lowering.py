"""Back from the optimized graph to IR, and the end-to-end optimize pass."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace

from . import relocation, timing
from .delay_model import DelayModel, annotate, default_model
from .ir import Design
from .wgraph import Role, WEdge, WGraph, build_wgraph, capacity, lower_graph

log = logging.getLogger(__name__)

PHASES = ("timing_prediction", "target_search", "solving", "ir_transformation")


@dataclass
class LoweringOutcome:
    design: Design
    stats: dict


def lower(g: WGraph) -> LoweringOutcome:
    d, stats = lower_graph(g)
    return LoweringOutcome(d, stats)


def normalize_bubbles(g: WGraph) -> WGraph:
    """Splice out bubbles that carry no registers on any incident edge."""
    ins, outs = g.in_edges(), g.out_edges()
    drop = {nd.id for nd in g.nodes if nd.role is Role.BUBBLE
            and all(e.w == 0 for e in ins[nd.id] + outs[nd.id])}
    if not drop:
        return g.copy()

    def root(e: WEdge) -> int:
        while e.src in drop:
            (e,) = ins[e.src]
        return e.src

    keep = [nd for nd in g.nodes if nd.id not in drop]
    remap = {nd.id: k for k, nd in enumerate(keep)}
    nodes = []
    for nd in keep:
        nodes.append(replace(nd, id=remap[nd.id], attrs=dict(nd.attrs)))
    edges = []
    for e in g.edges:
        if e.dst in drop:
            continue
        edges.append(WEdge(remap[root(e)], remap[e.dst], e.w, e.beta, e.slot, e.origin))
    return WGraph(nodes, edges, g.design_name)


@dataclass
class OptimizeOptions:
    target_delay_ps: float | None = None
    delay_model_path: str | None = None
    disable_timing_constraints: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.target_delay_ps is not None and not self.target_delay_ps > 0:
            raise ValueError("target delay must be positive")


@dataclass
class Metrics:
    register_count: int
    capacity_bits: int
    predicted_critical_path_ps: float


@dataclass
class Report:
    design_name: str
    nodes: int
    edges: int
    before: Metrics
    after: Metrics
    target_delay_ps: float | None
    constraint_count: int
    solver_objective: int
    ablation: bool = False
    forced_target: bool = False
    delta_nonzero: int = 0
    solver: dict = field(default_factory=dict)
    lowering: dict = field(default_factory=dict)
    phase_runtimes_ms: dict = field(default_factory=dict)

    def to_json(self, timings: bool = False) -> dict:
        doc = asdict(self)
        for part in ("before", "after"):
            doc[part]["predicted_critical_path_ps"] = _r(doc[part]["predicted_critical_path_ps"])
        doc["target_delay_ps"] = _r(self.target_delay_ps)
        if not timings:
            doc.pop("phase_runtimes_ms")
        else:
            doc["phase_runtimes_ms"] = {k: round(v, 3) for k, v in self.phase_runtimes_ms.items()}
        return doc

    def text(self) -> str:
        b, a = self.before, self.after
        tgt = "none (timing constraints disabled)" if self.ablation else f"{_r(self.target_delay_ps)} ps"
        lines = [
            f"design {self.design_name}",
            f"  graph          {self.nodes} nodes, {self.edges} edges",
            f"  registers      {b.register_count} -> {a.register_count}",
            f"  capacity       {b.capacity_bits} -> {a.capacity_bits} bits",
            f"  critical path  {_r(b.predicted_critical_path_ps)} -> {_r(a.predicted_critical_path_ps)} ps",
            f"  target         {tgt}",
            f"  |C|            {self.constraint_count}",
            f"  objective      {self.solver_objective}",
        ]
        if self.phase_runtimes_ms:
            ph = ", ".join(f"{k} {v:.2f}" for k, v in self.phase_runtimes_ms.items())
            lines.append(f"  phases (ms)    {ph}")
        return "\n".join(lines) + "\n"


def _r(x):
    return None if x is None else round(float(x), 6)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass
class OptimizeResult:
    design: Design
    report: Report
    graph: WGraph
    optimized: WGraph
    solution: relocation.RelocationSolution
    constraints: timing.TimingConstraintSet | None


def optimize(d: Design, m: DelayModel | None = None,
             opts: OptimizeOptions | None = None) -> OptimizeResult:
    opts = opts or OptimizeOptions()
    m = m or default_model()
    clock = {}

    def stage(name):
        return _Stage(name, clock)

    with stage("timing_prediction"):
        g = annotate(build_wgraph(d), m)
        cp0, _ = timing.critical_path(g)
    with stage("target_search"):
        if opts.disable_timing_constraints:
            target, cs = None, None
        else:
            wd = timing.compute_wd(g)
            target = opts.target_delay_ps if opts.target_delay_ps is not None else timing.search_target(g, wd)
            cs = timing.build_constraints(g, wd, target)
    with stage("solving"):
        prob = relocation.build_problem(g, cs)
        sol = relocation.solve(prob)
    with stage("ir_transformation"):
        g2 = relocation.apply(g, sol)
        out = lower(g2)
        cp1, _ = timing.critical_path(g2)

    r0, c0 = capacity(g)
    r1, c1 = capacity(g2)
    rep = Report(
        design_name=d.name, nodes=g.n, edges=len(g.edges),
        before=Metrics(r0, c0, cp0), after=Metrics(r1, c1, cp1),
        target_delay_ps=target, constraint_count=len(cs) if cs is not None else 0,
        solver_objective=sol.objective, ablation=opts.disable_timing_constraints,
        forced_target=opts.target_delay_ps is not None,
        delta_nonzero=int((sol.delta_s != 0).sum()),
        solver={k: int(v) for k, v in (sol.stats or {}).items()},
        lowering=dict(out.stats), phase_runtimes_ms=dict(clock),
    )
    if c1 - c0 != sol.objective:
        raise StageError("solving", AssertionError("capacity change does not match objective"))
    return OptimizeResult(out.design, rep, g, g2, sol, cs)


def pipeline_optimize(d: Design, m: DelayModel | None = None,
                      opts: OptimizeOptions | None = None) -> tuple[Design, Report]:
    res = optimize(d, m, opts)
    return res.design, res.report


class _Stage:
    def __init__(self, name, clock):
        self.name = name
        self.clock = clock

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, et, ev, tb):
        self.clock[self.name] = self.clock.get(self.name, 0.0) + 1e3 * (time.perf_counter() - self.t0)
        if ev is not None and not isinstance(ev, StageError):
            log.debug("stage %s failed: %s", self.name, ev)
            raise StageError(self.name, ev) from ev
        return False
