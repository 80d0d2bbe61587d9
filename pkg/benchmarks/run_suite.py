"""Run the golden design suite and print or refresh the locked baselines.

    python3 benchmarks/run_suite.py            # print current metrics as JSON
    python3 benchmarks/run_suite.py --write    # overwrite benchmarks/baselines.json
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from piperetime.ir import parse_design
from piperetime.lowering import OptimizeOptions, optimize

HERE = Path(__file__).resolve().parent
DESIGNS = HERE / "designs"
BASELINES = HERE / "baselines.json"


def suite_metrics() -> dict:
    rows = {}
    for path in sorted(DESIGNS.glob("*.pipe")):
        d = parse_design(path.read_text())
        row = {}
        for mode, opts in (("constrained", OptimizeOptions()),
                           ("ablation", OptimizeOptions(disable_timing_constraints=True))):
            rep = optimize(d, None, opts).report
            row[mode] = {
                "registers_before": rep.before.register_count,
                "registers_after": rep.after.register_count,
                "capacity_before": rep.before.capacity_bits,
                "capacity_after": rep.after.capacity_bits,
                "critical_path_before_ps": round(rep.before.predicted_critical_path_ps, 6),
                "critical_path_after_ps": round(rep.after.predicted_critical_path_ps, 6),
                "target_ps": None if rep.target_delay_ps is None else round(rep.target_delay_ps, 6),
                "objective": rep.solver_objective,
            }
        rows[path.stem] = row
    summary = {}
    for mode in ("constrained", "ablation"):
        regs = [r[mode]["registers_before"] - r[mode]["registers_after"] for r in rows.values()]
        caps = [r[mode]["capacity_before"] - r[mode]["capacity_after"] for r in rows.values()]
        summary[mode] = {
            "mean_register_reduction": round(sum(regs) / len(regs), 6),
            "mean_capacity_reduction_bits": round(sum(caps) / len(caps), 6),
        }
    return {"designs": rows, "summary": summary}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--write", action="store_true", help="refresh the committed baselines")
    args = ap.parse_args(argv)
    doc = suite_metrics()
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.write:
        BASELINES.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
