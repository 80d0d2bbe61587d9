"""Cycle-accurate simulation and randomized equivalence checking.

All arithmetic is unsigned modulo 2**width.  A ``delay by k`` is a k-stage
shift register whose stages start at zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._accel import HAVE_NUMBA, njit
from .ir import Design, OpKind, canonical_order

_OPC = {OpKind.CONST: 0, OpKind.ADD: 1, OpKind.SUB: 2, OpKind.MUL: 3, OpKind.AND: 4,
        OpKind.OR: 5, OpKind.XOR: 6, OpKind.NOT: 7, OpKind.MUX: 8, OpKind.CONCAT: 9,
        OpKind.EXTRACT: 10, OpKind.BUBBLE: 11}


class StimulusError(ValueError):
    pass


class InterfaceMismatch(ValueError):
    pass


@dataclass
class Stimulus:
    cycles: int
    inputs: dict[str, list[int]]


@dataclass
class Trace:
    names: list[str]
    widths: list[int]
    outputs: dict[str, list[int]]

    @property
    def cycles(self) -> int:
        return len(next(iter(self.outputs.values()))) if self.outputs else 0


@dataclass
class EquivalenceResult:
    equivalent: bool
    output: str | None = None
    index: int | None = None
    cycle: int | None = None
    values: tuple | None = None

    def __bool__(self):
        return self.equivalent


def output_names(d: Design) -> list[str]:
    """One name per sink operand; repeats get a ``#k`` suffix."""
    names, seen = [], {}
    for op in d.sinks():
        for v in op.operands:
            k = seen.get(v, 0)
            seen[v] = k + 1
            names.append(v if k == 0 else f"{v}#{k}")
    return names


class Program:
    """A design flattened into arrays for the interpreters."""

    def __init__(self, d: Design):
        ops = canonical_order(d)
        widths = d.widths()
        self.index = {}
        for op in ops:
            if op.result is not None:
                self.index[op.result] = len(self.index)
        self.nvals = len(self.index)
        self.val_width = np.zeros(self.nvals, dtype=np.int64)
        for v, i in self.index.items():
            self.val_width[i] = widths[v]
        self.pins = [op.result for op in ops if op.kind is OpKind.PIN]
        self.pin_idx = np.array([self.index[p] for p in self.pins], dtype=np.int64)
        self.pin_width = {p: widths[p] for p in self.pins}
        self.out_names = output_names(d)
        outs = [v for op in ops if op.kind is OpKind.SINK for v in op.operands]
        self.out_idx = np.array([self.index[v] for v in outs], dtype=np.int64)
        self.out_width = [widths[v] for v in outs]
        delays = [op for op in ops if op.kind is OpKind.DELAY]
        self.d_src = np.array([self.index[op.operands[0]] for op in delays], dtype=np.int64)
        self.d_dst = np.array([self.index[op.result] for op in delays], dtype=np.int64)
        self.d_len = np.array([op.attrs["delay"] for op in delays], dtype=np.int64)
        self.d_off = np.concatenate([[0], np.cumsum(self.d_len)]).astype(np.int64)
        comb = [op for op in ops if op.kind in _OPC]
        self.c_code = np.array([_OPC[op.kind] for op in comb], dtype=np.int64)
        self.c_dst = np.array([self.index[op.result] for op in comb], dtype=np.int64)
        self.c_width = np.array([op.width for op in comb], dtype=np.int64)
        starts, flat, imm = [0], [], []
        for op in comb:
            flat.extend(self.index[v] for v in op.operands)
            starts.append(len(flat))
            if op.kind is OpKind.CONST:
                imm.append(int(op.attrs["value"]) % (1 << op.width))
            elif op.kind is OpKind.EXTRACT:
                imm.append(int(op.attrs["low"]))
            else:
                imm.append(0)
        self.c_start = np.array(starts, dtype=np.int64)
        self.c_args = np.array(flat, dtype=np.int64)
        self.c_imm = imm
        self.max_width = int(self.val_width.max()) if self.nvals else 1


# ---------------------------------------------------------------------- numba kernel (<= 64 bits)

@njit
def _mask64(w):
    if w >= 64:
        return np.uint64(0xFFFFFFFFFFFFFFFF)
    return (np.uint64(1) << np.uint64(w)) - np.uint64(1)


@njit
def _run_nb(val_width, pin_idx, out_idx, d_src, d_dst, d_len, d_off,
            c_code, c_dst, c_width, c_start, c_args, c_imm, inputs):
    nb, cycles, _ = inputs.shape
    nvals = val_width.shape[0]
    nout = out_idx.shape[0]
    out = np.zeros((nb, cycles, nout), dtype=np.uint64)
    vals = np.zeros(nvals, dtype=np.uint64)
    ring = np.zeros(d_off[-1], dtype=np.uint64)
    pos = np.zeros(d_len.shape[0], dtype=np.int64)
    for b in range(nb):
        ring[:] = 0
        pos[:] = 0
        vals[:] = 0
        for t in range(cycles):
            for i in range(d_len.shape[0]):
                vals[d_dst[i]] = ring[d_off[i] + pos[i]]
            for i in range(pin_idx.shape[0]):
                vals[pin_idx[i]] = inputs[b, t, i]
            for i in range(c_code.shape[0]):
                code = c_code[i]
                m = _mask64(c_width[i])
                s, e = c_start[i], c_start[i + 1]
                r = np.uint64(0)
                if code == 0:
                    r = c_imm[i]
                elif code == 1:
                    for j in range(s, e):
                        r = r + vals[c_args[j]]
                elif code == 2:
                    r = vals[c_args[s]]
                    for j in range(s + 1, e):
                        r = r - vals[c_args[j]]
                elif code == 3:
                    r = np.uint64(1)
                    for j in range(s, e):
                        r = r * vals[c_args[j]]
                elif code == 4:
                    r = m
                    for j in range(s, e):
                        r = r & vals[c_args[j]]
                elif code == 5:
                    for j in range(s, e):
                        r = r | vals[c_args[j]]
                elif code == 6:
                    for j in range(s, e):
                        r = r ^ vals[c_args[j]]
                elif code == 7:
                    r = ~vals[c_args[s]]
                elif code == 8:
                    if vals[c_args[s]] != 0:
                        r = vals[c_args[s + 1]]
                    else:
                        r = vals[c_args[s + 2]]
                elif code == 9:
                    for j in range(s, e):
                        a = c_args[j]
                        r = (r << np.uint64(val_width[a])) | vals[a]
                elif code == 10:
                    r = vals[c_args[s]] >> np.uint64(c_imm[i])
                else:
                    r = vals[c_args[s]]
                vals[c_dst[i]] = r & m
            for i in range(nout):
                out[b, t, i] = vals[out_idx[i]]
            for i in range(d_len.shape[0]):
                ring[d_off[i] + pos[i]] = vals[d_src[i]]
                pos[i] += 1
                if pos[i] == d_len[i]:
                    pos[i] = 0
    return out


# ---------------------------------------------------------------------- numpy kernel (<= 64 bits)

def _run_np(p: Program, inputs: np.ndarray) -> np.ndarray:
    nb, cycles, _ = inputs.shape
    out = np.zeros((nb, cycles, len(p.out_idx)), dtype=np.uint64)
    vals = np.zeros((p.nvals, nb), dtype=np.uint64)
    ring = np.zeros((int(p.d_off[-1]), nb), dtype=np.uint64)
    pos = np.zeros(len(p.d_len), dtype=np.int64)
    masks = [np.uint64((1 << int(w)) - 1) for w in p.c_width]
    imms = [np.uint64(x) for x in p.c_imm]
    widths64 = [np.uint64(w) for w in p.val_width]
    ins = np.ascontiguousarray(inputs.transpose(1, 2, 0))
    with np.errstate(over="ignore"):
        for t in range(cycles):
            if len(p.d_len):
                vals[p.d_dst] = ring[p.d_off[:-1] + pos]
            vals[p.pin_idx] = ins[t]
            for i, code in enumerate(p.c_code):
                args = p.c_args[p.c_start[i]:p.c_start[i + 1]]
                if code == 0:
                    r = np.full(nb, imms[i], dtype=np.uint64)
                elif code == 1:
                    r = vals[args].sum(axis=0, dtype=np.uint64)
                elif code == 2:
                    r = vals[args[0]] - vals[args[1:]].sum(axis=0, dtype=np.uint64)
                elif code == 3:
                    r = vals[args].prod(axis=0, dtype=np.uint64)
                elif code == 4:
                    r = np.bitwise_and.reduce(vals[args], axis=0)
                elif code == 5:
                    r = np.bitwise_or.reduce(vals[args], axis=0)
                elif code == 6:
                    r = np.bitwise_xor.reduce(vals[args], axis=0)
                elif code == 7:
                    r = ~vals[args[0]]
                elif code == 8:
                    r = np.where(vals[args[0]] != 0, vals[args[1]], vals[args[2]])
                elif code == 9:
                    r = np.zeros(nb, dtype=np.uint64)
                    for a in args:
                        r = (r << widths64[a]) | vals[a]
                elif code == 10:
                    r = vals[args[0]] >> imms[i]
                else:
                    r = vals[args[0]]
                vals[p.c_dst[i]] = r & masks[i]
            out[:, t, :] = vals[p.out_idx].T
            if len(p.d_len):
                ring[p.d_off[:-1] + pos] = vals[p.d_src]
                pos += 1
                pos[pos == p.d_len] = 0
    return out


# ---------------------------------------------------------------------- arbitrary width

def _run_py(p: Program, inputs) -> list:
    """Python-int interpreter, used when some value is wider than 64 bits."""
    res = []
    for stim in inputs:
        vals = [0] * p.nvals
        rings = [[0] * int(k) for k in p.d_len]
        pos = [0] * len(rings)
        trace = []
        for t in range(len(stim)):
            for i, r in enumerate(rings):
                vals[p.d_dst[i]] = r[pos[i]]
            for i, pi in enumerate(p.pin_idx):
                vals[pi] = int(stim[t][i])
            for i, code in enumerate(p.c_code):
                args = [vals[a] for a in p.c_args[p.c_start[i]:p.c_start[i + 1]]]
                w = int(p.c_width[i])
                if code == 0:
                    r = p.c_imm[i]
                elif code == 1:
                    r = sum(args)
                elif code == 2:
                    r = args[0] - sum(args[1:])
                elif code == 3:
                    r = 1
                    for a in args:
                        r *= a
                elif code == 4:
                    r = -1
                    for a in args:
                        r &= a
                elif code == 5:
                    r = 0
                    for a in args:
                        r |= a
                elif code == 6:
                    r = 0
                    for a in args:
                        r ^= a
                elif code == 7:
                    r = ~args[0]
                elif code == 8:
                    r = args[1] if args[0] else args[2]
                elif code == 9:
                    r = 0
                    for a, v in zip(p.c_args[p.c_start[i]:p.c_start[i + 1]], args):
                        r = (r << int(p.val_width[a])) | v
                elif code == 10:
                    r = args[0] >> p.c_imm[i]
                else:
                    r = args[0]
                vals[p.c_dst[i]] = r & ((1 << w) - 1)
            trace.append([vals[o] for o in p.out_idx])
            for i, r in enumerate(rings):
                r[pos[i]] = vals[p.d_src[i]]
                pos[i] = (pos[i] + 1) % len(r)
        res.append(trace)
    return res


# ---------------------------------------------------------------------- public API

def _check_stimulus(p: Program, s: Stimulus) -> None:
    if s.cycles < 1:
        raise StimulusError("stimulus needs at least one cycle")
    missing = [x for x in p.pins if x not in s.inputs]
    if missing:
        raise StimulusError(f"stimulus does not drive pin(s): {', '.join(missing)}")
    for name, seq in s.inputs.items():
        if name not in p.pin_width:
            raise StimulusError(f"stimulus drives unknown pin {name}")
        if len(seq) != s.cycles:
            raise StimulusError(f"pin {name}: {len(seq)} values for {s.cycles} cycles")
        lim = 1 << p.pin_width[name]
        for t, v in enumerate(seq):
            if not 0 <= int(v) < lim:
                raise StimulusError(f"pin {name} cycle {t}: value {v} out of range for i{p.pin_width[name]}")


def simulate_many(d: Design, stims: list[Stimulus], use_numba=None):
    """Outputs of ``d`` for each stimulus, as lists of per-cycle rows."""
    p = d if isinstance(d, Program) else Program(d)
    for s in stims:
        _check_stimulus(p, s)
    cycles = {s.cycles for s in stims}
    use = HAVE_NUMBA if use_numba is None else use_numba
    if p.max_width > 64 or len(cycles) != 1:
        rows = [[[s.inputs[x][t] for x in p.pins] for t in range(s.cycles)] for s in stims]
        return _run_py(p, rows)
    (c,) = cycles
    inputs = np.zeros((len(stims), c, len(p.pins)), dtype=np.uint64)
    for b, s in enumerate(stims):
        for i, x in enumerate(p.pins):
            inputs[b, :, i] = np.asarray(s.inputs[x], dtype=np.uint64)
    if use:
        imm = np.array(p.c_imm, dtype=np.uint64)
        out = _run_nb(p.val_width, p.pin_idx, p.out_idx, p.d_src, p.d_dst, p.d_len, p.d_off,
                      p.c_code, p.c_dst, p.c_width, p.c_start, p.c_args, imm, inputs)
    else:
        out = _run_np(p, inputs)
    return out.tolist()


def simulate(d: Design, s: Stimulus, use_numba=None) -> Trace:
    p = Program(d)
    rows = simulate_many(p, [s], use_numba)[0]
    outputs = {n: [int(r[i]) for r in rows] for i, n in enumerate(p.out_names)}
    return Trace(p.out_names, list(p.out_width), outputs)


def random_stimulus(d: Design, cycles: int, seed: int) -> Stimulus:
    rng = np.random.default_rng(seed)
    widths = d.widths()
    inputs = {}
    for op in d.pins():
        w = widths[op.result]
        if w <= 62:
            inputs[op.result] = rng.integers(0, 1 << w, size=cycles).tolist()
        else:
            words = (w + 31) // 32
            raw = rng.integers(0, 1 << 32, size=(cycles, words))
            inputs[op.result] = [sum(int(x) << (32 * k) for k, x in enumerate(row)) % (1 << w)
                                 for row in raw]
    return Stimulus(cycles, inputs)


def interface(d: Design):
    widths = d.widths()
    pins = sorted((op.result, widths[op.result]) for op in d.pins())
    sinks = [tuple(op.attrs.get("widths") or [widths[v] for v in op.operands]) for op in d.sinks()]
    return pins, sinks


def check_equivalence(a: Design, b: Design, s: Stimulus, warmup: int = 0,
                      use_numba=None) -> EquivalenceResult:
    return check_equivalence_many(a, b, [s], warmup, use_numba)


def check_equivalence_many(a: Design, b: Design, stims: list[Stimulus], warmup: int = 0,
                           use_numba=None) -> EquivalenceResult:
    """Positional comparison of sink outputs from cycle ``warmup`` on."""
    ia, ib = interface(a), interface(b)
    if ia != ib:
        raise InterfaceMismatch(f"interfaces differ: {ia} vs {ib}")
    pa, pb = Program(a), Program(b)
    ra = simulate_many(pa, stims, use_numba)
    rb = simulate_many(pb, stims, use_numba)
    for k, (ta, tb) in enumerate(zip(ra, rb)):
        for t in range(warmup, len(ta)):
            if ta[t] != tb[t]:
                i = next(j for j in range(len(ta[t])) if ta[t][j] != tb[t][j])
                return EquivalenceResult(False, pa.out_names[i], i, t, (int(ta[t][i]), int(tb[t][i])))
    return EquivalenceResult(True)


# ---------------------------------------------------------------------- files

def read_stimulus(path) -> Stimulus:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip() != "cycle":
        raise StimulusError("stimulus header must start with 'cycle'")
    names = [n.strip() for n in rows[0][1:]]
    body = [r for r in rows[1:] if r]
    inputs = {n: [int(r[i + 1]) for r in body] for i, n in enumerate(names)}
    return Stimulus(len(body), inputs)


def write_stimulus(path, s: Stimulus) -> None:
    names = list(s.inputs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["cycle"] + names)
        for t in range(s.cycles):
            wr.writerow([t] + [s.inputs[n][t] for n in names])


def write_trace(path, tr: Trace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["cycle"] + tr.names)
        for t in range(tr.cycles):
            wr.writerow([t] + [tr.outputs[n][t] for n in tr.names])
