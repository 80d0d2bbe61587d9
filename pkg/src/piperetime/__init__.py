"""Register relocation for pipelined sequential circuits at the IR level."""
from .ir import Design, Operation, OpKind, ParseError, ValidationError, parse_design, print_design, validate
from .wgraph import WGraph, build_wgraph, capacity, wgraph_to_design, blackbox_boundaries
from .delay_model import default_model, fit, annotate, load_model
from .timing import critical_path, compute_wd, build_constraints, check_feasibility, search_target
from .relocation import build_problem, solve, brute_force_solve, apply
from .lowering import lower, pipeline_optimize, OptimizeOptions, Report
from .simulator import simulate, check_equivalence, Stimulus

__version__ = "0.1.0"
