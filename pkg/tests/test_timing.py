import itertools

import numpy as np
import pytest

from piperetime import kernels
from piperetime.delay_model import OpFeatures, annotate, default_model
from piperetime.fuzz import random_graph
from piperetime.ir import OpKind, parse_design
from piperetime.timing import (anchored_nodes, build_constraints, candidate_targets, check_feasibility,
                               compute_wd, critical_path, search_target)
from piperetime.wgraph import Role, WEdge, WGraph, WNode, build_wgraph

from helpers import brute_critical_path, load, path_enumeration_wd

M = default_model()
ADD8 = M.predict(OpFeatures(OpKind.ADD, 2, 8))


def iir():
    return annotate(build_wgraph(load("iir")), M)


def comb(i, delta):
    return WNode(i, Role.COMB, OpKind.ADD, 2, 8, delta=float(delta))


def _feasible_by_enumeration(g, cs, bound=3):
    """Exhaustive search over stage updates of the non-anchored nodes."""
    anchored = set(anchored_nodes(g))
    free = [v for v in range(g.n) if v not in anchored]
    for vals in itertools.product(range(-bound, bound + 1), repeat=len(free)):
        r = np.zeros(g.n, dtype=int)
        r[free] = vals
        if any(e.w + r[e.dst] - r[e.src] < 0 for e in g.edges):
            continue
        if all(W + r[v] - r[u] >= 1 for u, v, W in cs.pairs):
            return True
    return False


def _linear_scan(g, wd):
    for t in candidate_targets(wd):
        if check_feasibility(g, build_constraints(g, wd, t)):
            return float(t)
    return None


def _node(g, name):
    return next(nd.id for nd in g.nodes if nd.origin == name)


def test_iir_critical_path_is_two_adders():
    g = iir()
    cp, path = critical_path(g)
    assert cp == 2 * ADD8
    kinds = [g.nodes[v].kind for v in path if g.nodes[v].role is Role.COMB]
    assert kinds == [OpKind.ADD, OpKind.ADD]


def test_wire_has_zero_delay():
    g = WGraph([WNode(0, Role.PIN), WNode(1, Role.SINK)], [WEdge(0, 1, 0, 8)])
    assert critical_path(g)[0] == 0.0


@pytest.mark.parametrize("seed", range(40))
def test_critical_path_matches_enumeration(seed):
    g = random_graph(seed, max_nodes=12)
    assert critical_path(g)[0] == brute_critical_path(g)


def test_parallel_paths_take_longer_delay():
    g = WGraph([comb(0, 0), comb(1, 5), comb(2, 9), comb(3, 0)],
               [WEdge(0, 1, 0, 8), WEdge(1, 3, 0, 8), WEdge(0, 2, 0, 8), WEdge(2, 3, 0, 8)])
    wd = compute_wd(g)
    assert wd.get(0, 3) == (0, 9.0)


def test_single_registered_edge():
    g = WGraph([comb(0, 4), comb(1, 7)], [WEdge(0, 1, 2, 8)])
    assert compute_wd(g).get(0, 1) == (2, 11.0)
    assert compute_wd(g).get(1, 0) is None


def test_diagonal_is_empty_path():
    g = iir()
    wd = compute_wd(g)
    for v in range(g.n):
        assert wd.get(v, v) == (0, g.nodes[v].delta)


@pytest.mark.parametrize("name", ["iir", "fir4", "mac_fanout", "ctrl_pipe"])
def test_wd_matches_path_enumeration_on_golden(name):
    g = annotate(build_wgraph(load(name)), M)
    W, D = path_enumeration_wd(g)
    wd = compute_wd(g)
    for u in range(g.n):
        for v in range(g.n):
            assert wd.get(u, v) == (None if W[u][v] is None else (W[u][v], D[u][v]))


@pytest.mark.parametrize("seed", range(30))
def test_wd_matches_path_enumeration_random(seed):
    g = random_graph(seed)
    W, D = path_enumeration_wd(g)
    wd = compute_wd(g)
    for u in range(g.n):
        for v in range(g.n):
            assert wd.get(u, v) == (None if W[u][v] is None else (W[u][v], D[u][v]))


def test_iir_mul_to_add_entry():
    g = iir()
    wd = compute_wd(g)
    W, D = path_enumeration_wd(g)
    pa, y = _node(g, "%pa"), _node(g, "%y")
    assert wd.get(pa, y) == (W[pa][y], D[pa][y]) == (1, M.predict(OpFeatures(OpKind.MUL, 2, 8)) + 2 * ADD8)


def test_constraint_set_edges():
    g = iir()
    wd = compute_wd(g)
    assert len(build_constraints(g, wd, float(wd.D.max()))) == 0
    cs = build_constraints(g, wd, 2 * ADD8 - 1)
    assert (_node(g, "%w"), _node(g, "%y"), 0) in cs.pairs
    cs_all = build_constraints(g, wd, -1.0)
    assert len(cs_all) == int(wd.reachable().sum())


def test_no_constraints_identity_feasible():
    g = iir()
    res = check_feasibility(g, build_constraints(g, compute_wd(g), 1e9))
    assert res.feasible and not res.witness.any()


def test_register_free_boundary_path_is_infeasible():
    d = parse_design("design p {\n %a = pin : i8\n %s = add %a, %a : i8\n sink %s : i8\n}\n")
    g = annotate(build_wgraph(d), M)
    wd = compute_wd(g)
    res = check_feasibility(g, build_constraints(g, wd, ADD8 - 1))
    assert not res.feasible
    assert res.violation and all(tag[0] in ("edge", "timing") for tag in res.violation)


def test_iir_feasibility_against_enumeration():
    g = iir()
    wd = compute_wd(g)
    assert check_feasibility(g, build_constraints(g, wd, 2 * ADD8))
    for t in (ADD8 + 1e-3, ADD8 + 40, 2 * ADD8 - 1):
        cs = build_constraints(g, wd, t)
        assert bool(check_feasibility(g, cs)) == _feasible_by_enumeration(g, cs)


@pytest.mark.parametrize("seed", range(25))
def test_feasibility_against_enumeration_random(seed):
    g = random_graph(seed, max_nodes=7, max_edges=12)
    wd = compute_wd(g)
    cands = candidate_targets(wd)
    for t in cands[:: max(1, len(cands) // 4)]:
        cs = build_constraints(g, wd, t)
        res = check_feasibility(g, cs)
        assert bool(res) == _feasible_by_enumeration(g, cs, bound=3)
        if res:
            r = res.witness
            assert all(e.w + r[e.dst] - r[e.src] >= 0 for e in g.edges)
            assert all(W + r[v] - r[u] >= 1 for u, v, W in cs.pairs)


def test_search_target_iir_equals_linear_scan():
    g = iir()
    wd = compute_wd(g)
    t = search_target(g, wd)
    assert t == _linear_scan(g, wd) == 2 * ADD8


def test_search_target_already_pipelined():
    g = annotate(build_wgraph(load("iir")), M)
    t0 = critical_path(g)[0]
    assert search_target(g, compute_wd(g)) == t0


def test_search_target_single_node():
    d = parse_design("design p {\n %a = pin : i8\n %s = mul %a, %a : i8\n sink %s : i8\n}\n")
    g = annotate(build_wgraph(d), M)
    assert search_target(g, compute_wd(g)) == M.predict(OpFeatures(OpKind.MUL, 2, 8))


@pytest.mark.parametrize("seed", range(40))
def test_search_target_random(seed):
    g = random_graph(seed)
    wd = compute_wd(g)
    t = search_target(g, wd)
    assert t == _linear_scan(g, wd)
    assert t <= critical_path(g)[0]


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba disabled")
@pytest.mark.parametrize("seed", range(20))
def test_kernel_backends_agree(seed):
    g = random_graph(seed, max_nodes=12)
    a, b = compute_wd(g, use_numba=True), compute_wd(g, use_numba=False)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.D, b.D)
    assert critical_path(g, use_numba=True) == critical_path(g, use_numba=False)
    cs = build_constraints(g, a, float(np.median(candidate_targets(a))))
    fa, fb = check_feasibility(g, cs, use_numba=True), check_feasibility(g, cs, use_numba=False)
    assert fa.feasible == fb.feasible
    if fa.feasible:
        assert np.array_equal(fa.witness, fb.witness)
