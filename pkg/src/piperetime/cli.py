"""Command-line driver.

Exit codes: 1 parse error, 2 validation error, 3 solver error, 4 I/O error,
5 equivalence failure, 64 bad usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import delay_model as dm
from .ir import ParseError, ValidationError, parse_design, print_design
from .lowering import Metrics, OptimizeOptions, Report, StageError, optimize
from .relocation import Infeasible
from .simulator import (InterfaceMismatch, StimulusError, check_equivalence_many, random_stimulus,
                        read_stimulus, simulate, write_trace)
from .timing import critical_path
from .wgraph import build_wgraph, capacity

EXIT_PARSE, EXIT_VALIDATE, EXIT_SOLVER, EXIT_IO, EXIT_EQUIV, EXIT_USAGE = 1, 2, 3, 4, 5, 64

log = logging.getLogger("piperetime")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setup_logging():
    level = os.environ.get("PIPERETIME_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _err(msg):
    print(f"piperetime: {msg}", file=sys.stderr)


def _read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _load_design(path):
    return parse_design(_read_text(path))


def _load_model(path):
    return dm.load_model(path) if path else dm.default_model()


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_optimize(args) -> int:
    opts = OptimizeOptions(target_delay_ps=args.target_ps, delay_model_path=args.delay_model,
                           disable_timing_constraints=args.no_timing_constraints, seed=args.seed)
    d = _load_design(args.input)
    res = optimize(d, _load_model(args.delay_model), opts)
    _write_text(args.out, print_design(res.design))
    if args.report:
        _write_text(args.report, _json(res.report.to_json(timings=args.timings)))
    sys.stderr.write(res.report.text())
    return 0


def analysis_report(d, m) -> Report:
    g = dm.annotate(build_wgraph(d), m)
    regs, bits = capacity(g)
    cp, _ = critical_path(g)
    met = Metrics(regs, bits, cp)
    return Report(d.name, g.n, len(g.edges), met, met, None, 0, 0)


def cmd_report(args) -> int:
    rep = analysis_report(_load_design(args.input), _load_model(args.delay_model))
    doc = rep.to_json()
    doc.pop("after")
    if args.report:
        _write_text(args.report, _json(doc))
    if args.json:
        sys.stdout.write(_json(doc))
    else:
        b = rep.before
        sys.stdout.write(
            f"design {rep.design_name}\n"
            f"  graph          {rep.nodes} nodes, {rep.edges} edges\n"
            f"  registers      {b.register_count}\n"
            f"  capacity       {b.capacity_bits} bits\n"
            f"  critical path  {round(b.predicted_critical_path_ps, 6)} ps\n")
    return 0


def cmd_simulate(args) -> int:
    d = _load_design(args.input)
    tr = simulate(d, read_stimulus(args.stimulus))
    if args.out in (None, "-"):
        import io
        buf = io.StringIO()
        _trace_to(buf, tr)
        sys.stdout.write(buf.getvalue())
    else:
        write_trace(args.out, tr)
    return 0


def _trace_to(fh, tr):
    fh.write(",".join(["cycle"] + tr.names) + "\n")
    for t in range(tr.cycles):
        fh.write(",".join([str(t)] + [str(tr.outputs[n][t]) for n in tr.names]) + "\n")


def cmd_check(args) -> int:
    a, b = _load_design(args.original), _load_design(args.optimized)
    warm = args.warmup
    if warm is None:
        warm = max(a.register_count(), b.register_count())
    stims = [random_stimulus(a, args.cycles, args.seed + k) for k in range(args.runs)]
    res = check_equivalence_many(a, b, stims, warm)
    if res:
        print(f"equivalent: {args.runs} x {args.cycles} cycles, warm-up {warm}")
        return 0
    print(f"MISMATCH on output {res.output} (index {res.index}) at cycle {res.cycle}: "
          f"{res.values[0]} vs {res.values[1]}")
    return EXIT_EQUIV


def cmd_fit(args) -> int:
    samples = dm.read_samples(args.samples)
    cfg = dm.FitConfig(n_trees=args.trees, depth=args.depth, learning_rate=args.learning_rate,
                       seed=args.seed)
    model = dm.fit(samples, cfg)
    if args.out:
        model.save(args.out)
    else:
        sys.stdout.write(_json(model.to_json()))
    print(f"fitted {len(samples)} samples: train MSE {dm.mse(model, samples):.4g} "
          f"(mean baseline {dm.baseline_mse(samples):.4g})", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="piperetime", description="IR-level register relocation")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    o = sub.add_parser("optimize", help="relocate registers and write the optimized IR")
    o.add_argument("input")
    o.add_argument("--out", help="output IR path (default: stdout)")
    o.add_argument("--report", help="write the JSON report here")
    o.add_argument("--target-ps", type=float, help="force the target delay instead of searching")
    o.add_argument("--no-timing-constraints", action="store_true", help="drop the timing constraint set")
    o.add_argument("--delay-model", help="JSON delay model (default: built-in table)")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--timings", action="store_true", help="include phase runtimes in the JSON report")
    o.set_defaults(fn=cmd_optimize)

    r = sub.add_parser("report", help="graph statistics without transforming")
    r.add_argument("input")
    r.add_argument("--delay-model")
    r.add_argument("--report", help="write the JSON report here")
    r.add_argument("--json", action="store_true", help="print JSON instead of text")
    r.set_defaults(fn=cmd_report)

    s = sub.add_parser("simulate", help="run a stimulus file through a design")
    s.add_argument("input")
    s.add_argument("stimulus")
    s.add_argument("--out", help="trace CSV path (default: stdout)")
    s.set_defaults(fn=cmd_simulate)

    c = sub.add_parser("check", help="randomized equivalence check of two designs")
    c.add_argument("original")
    c.add_argument("optimized")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--runs", type=int, default=10)
    c.add_argument("--cycles", type=int, default=1000)
    c.add_argument("--warmup", type=int, help="default: register count of the larger design")
    c.set_defaults(fn=cmd_check)

    f = sub.add_parser("fit-delays", help="fit a boosted-tree delay model from samples")
    f.add_argument("samples", help="CSV with kind,operands,width,delay_ps")
    f.add_argument("--out", help="model JSON path (default: stdout)")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--trees", type=int, default=100)
    f.add_argument("--depth", type=int, default=2)
    f.add_argument("--learning-rate", type=float, default=0.1)
    f.set_defaults(fn=cmd_fit)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        _err(f"parse error: {exc}")
        return EXIT_PARSE
    except ValidationError as exc:
        _err(f"invalid design: {exc}")
        return EXIT_VALIDATE
    except StageError as exc:
        cause = exc.cause
        if isinstance(cause, ValidationError):
            _err(f"invalid design: {cause}")
            return EXIT_VALIDATE
        if isinstance(cause, (OSError, dm.UnknownKind)):
            _err(f"{exc.stage}: {cause}")
            return EXIT_IO
        _err(f"{exc.stage} failed: {cause}")
        return EXIT_SOLVER
    except Infeasible as exc:
        _err(str(exc))
        return EXIT_SOLVER
    except (StimulusError, InterfaceMismatch) as exc:
        _err(str(exc))
        return EXIT_IO if isinstance(exc, StimulusError) else EXIT_EQUIV
    except (OSError, ValueError, KeyError) as exc:
        # malformed or inadequate side files (model JSON, sample CSV, stimulus) count as I/O problems
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
