import copy

import numpy as np
import pytest

from piperetime._accel import HAVE_NUMBA
from piperetime.fuzz import random_design
from piperetime.ir import OpKind, parse_design
from piperetime.lowering import optimize
from piperetime.simulator import (InterfaceMismatch, Stimulus, StimulusError, check_equivalence,
                                  check_equivalence_many, output_names, random_stimulus, read_stimulus,
                                  simulate, simulate_many, write_stimulus, write_trace)

from helpers import golden_paths, load


def reference(d, stim):
    """Direct per-cycle evaluation with Python integers; registers start at zero."""
    defs = d.defs()
    width = d.widths()
    history: dict[str, list[int]] = {v: [] for v in defs}
    out = []
    for t in range(stim.cycles):
        memo = {}

        def val(v, t=t, memo=memo):
            if v in memo:
                return memo[v]
            op = defs[v]
            m = (1 << op.width) - 1
            k = op.kind
            a = op.operands
            if k is OpKind.PIN:
                r = stim.inputs[v][t] & m
            elif k is OpKind.DELAY:
                n = op.attrs["delay"]
                r = history[a[0]][t - n] if t - n >= 0 else 0
            elif k is OpKind.CONST:
                r = op.attrs["value"] & m
            elif k is OpKind.BUBBLE:
                r = val(a[0])
            elif k is OpKind.ADD:
                r = sum(val(x) for x in a) & m
            elif k is OpKind.SUB:
                r = val(a[0])
                for x in a[1:]:
                    r -= val(x)
                r &= m
            elif k is OpKind.MUL:
                r = 1
                for x in a:
                    r *= val(x)
                r &= m
            elif k in (OpKind.AND, OpKind.OR, OpKind.XOR):
                vals = [val(x) for x in a]
                r = vals[0]
                for y in vals[1:]:
                    r = r & y if k is OpKind.AND else r | y if k is OpKind.OR else r ^ y
            elif k is OpKind.NOT:
                r = ~val(a[0]) & m
            elif k is OpKind.MUX:
                r = val(a[1]) if val(a[0]) else val(a[2])
            elif k is OpKind.CONCAT:
                r = 0
                for x in a:
                    r = (r << width[x]) | val(x)
            elif k is OpKind.EXTRACT:
                r = (val(a[0]) >> op.attrs["low"]) & m
            memo[v] = r
            return r

        for v in defs:
            history[v].append(val(v))
        out.append([history[v][t] for s in d.sinks() for v in s.operands])
    return out


def rows(trace):
    return [[trace.outputs[n][t] for n in trace.names] for t in range(trace.cycles)]


def test_wire():
    d = parse_design("design w {\n %a = pin : i8\n sink %a : i8\n}\n")
    tr = simulate(d, Stimulus(3, {"%a": [1, 2, 3]}))
    assert tr.outputs["%a"] == [1, 2, 3]


def test_two_stage_shift():
    d = parse_design("design s {\n %a = pin : i8\n %z = delay %a by 2 : i8\n sink %z : i8\n}\n")
    assert simulate(d, Stimulus(4, {"%a": [5, 6, 7, 8]})).outputs["%z"] == [0, 0, 5, 6]


def iir_recurrence(x, a=3, b=3, bits=8):
    m = (1 << bits) - 1
    y, w = [], []
    for n in range(len(x)):
        yn1 = y[n - 1] if n >= 1 else 0
        yn2 = y[n - 2] if n >= 2 else 0
        w.append((a * yn1 + b * yn2) & m)
        y.append(((w[n - 1] if n >= 1 else 0) + x[n]) & m)
    return y


def test_iir_impulse_matches_recurrence():
    x = [1] + [0] * 63
    tr = simulate(load("iir"), Stimulus(len(x), {"%x": x}))
    assert tr.outputs["%y"] == iir_recurrence(x)


def test_iir_random_matches_recurrence():
    s = random_stimulus(load("iir"), 500, 4)
    assert simulate(load("iir"), s).outputs["%y"] == iir_recurrence(s.inputs["%x"])


@pytest.mark.parametrize("path", golden_paths(), ids=lambda p: p.stem)
def test_golden_against_reference(path):
    d = parse_design(path.read_text())
    s = random_stimulus(d, 120, 1)
    assert rows(simulate(d, s)) == reference(d, s)


@pytest.mark.parametrize("seed", range(40))
def test_random_designs_against_reference(seed):
    d = random_design(seed)
    s = random_stimulus(d, 60, seed)
    assert rows(simulate(d, s)) == reference(d, s)


def test_concat_first_operand_is_high():
    d = parse_design("design c {\n %h = pin : i4\n %l = pin : i4\n %c = concat %h, %l : i8\n"
                     " sink %c : i8\n}\n")
    assert simulate(d, Stimulus(1, {"%h": [0xA], "%l": [0x5]})).outputs["%c"] == [0xA5]


def test_wide_values_use_full_precision():
    d = load("wide_xor")
    big = (1 << 95) | 12345
    s = Stimulus(3, {"%u": [big, 0, 0], "%v": [(1 << 96) - 1, 0, 0]})
    tr = simulate(d, s)
    assert tr.outputs["%o"][1] == (1 << 96) - 1
    assert rows(tr) == reference(d, s)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba disabled")
@pytest.mark.parametrize("seed", range(15))
def test_backends_agree(seed):
    d = random_design(seed)
    stims = [random_stimulus(d, 80, k) for k in range(3)]
    a = simulate_many(d, stims, use_numba=True)
    b = simulate_many(d, stims, use_numba=False)
    assert all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))


def test_self_equivalence():
    d = load("fir4")
    assert check_equivalence(d, d, random_stimulus(d, 100, 0), 0)


@pytest.mark.parametrize("path", golden_paths(), ids=lambda p: p.stem)
def test_optimized_is_equivalent(path):
    d = parse_design(path.read_text())
    opt = optimize(d).design
    warm = max(d.register_count(), opt.register_count())
    assert check_equivalence(d, opt, random_stimulus(d, 1000, 3), warm)


def test_mutated_delay_is_caught():
    d = load("iir")
    bad = copy.deepcopy(d)
    op = next(o for o in bad.ops if o.result == "%pb_r")
    op.attrs["delay"] = 2
    res = check_equivalence(d, bad, random_stimulus(d, 200, 0), 5)
    assert not res
    assert res.cycle is not None and res.cycle >= 5 and res.values[0] != res.values[1]


def test_interface_mismatch():
    a = parse_design("design a {\n %x = pin : i8\n sink %x : i8\n}\n")
    b = parse_design("design b {\n %x = pin : i4\n sink %x : i4\n}\n")
    with pytest.raises(InterfaceMismatch):
        check_equivalence(a, b, Stimulus(1, {"%x": [1]}))


def test_missing_pin_column_is_named():
    d = load("mac_fanout")
    with pytest.raises(StimulusError) as exc:
        simulate(d, Stimulus(2, {"%a": [1, 2], "%b": [3, 4]}))
    assert "%en" in str(exc.value)


def test_duplicate_sink_names_are_distinct():
    d = parse_design("design d {\n %x = pin : i2\n sink %x, %x : i2, i2\n}\n")
    assert output_names(d) == ["%x", "%x#1"]


def test_stimulus_and_trace_files(tmp_path):
    d = load("iir")
    s = random_stimulus(d, 20, 9)
    p = tmp_path / "s.csv"
    write_stimulus(p, s)
    assert read_stimulus(p) == s
    t1, t2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    write_trace(t1, simulate(d, read_stimulus(p)))
    write_trace(t2, simulate(d, read_stimulus(p)))
    assert t1.read_bytes() == t2.read_bytes()
    assert t1.read_text().splitlines()[0] == "cycle,%y"
