"""Textual sequential-circuit IR: data model, parser, printer and validation.

A design is a flat list of SSA-style operations::

    design iir {
      %x = pin : i8
      %y1 = delay %y by 1 : i8
      %m = mul %a, %y1 : i8
      %y = add %m, %x : i8
      sink %y : i8
    }

Module bodies are graph regions: an operand may name a value defined further
down, so feedback through ``delay`` needs no special syntax.  Combinational
cycles (cycles that do not pass through a ``delay``) are rejected.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

MAX_WIDTH = 4096


class OpKind(enum.Enum):
    PIN = "pin"
    SINK = "sink"
    DELAY = "delay"
    BUBBLE = "bubble"
    CONST = "const"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    AND = "and"
    OR = "or"
    XOR = "xor"
    NOT = "not"
    MUX = "mux"
    CONCAT = "concat"
    EXTRACT = "extract"

    @property
    def is_comb(self) -> bool:
        return self not in _NON_COMB


_NON_COMB = {OpKind.PIN, OpKind.SINK, OpKind.DELAY, OpKind.BUBBLE}
VARIADIC = {OpKind.ADD, OpKind.SUB, OpKind.MUL, OpKind.AND, OpKind.OR, OpKind.XOR}


@dataclass
class Operation:
    kind: OpKind
    result: str | None
    operands: list[str] = field(default_factory=list)
    attrs: dict = field(default_factory=dict)
    width: int | None = None

    def operand_widths(self, widths: dict[str, int]) -> list[int]:
        return [widths[v] for v in self.operands]


@dataclass
class Design:
    name: str
    ops: list[Operation] = field(default_factory=list)

    def defs(self) -> dict[str, Operation]:
        return {op.result: op for op in self.ops if op.result is not None}

    def widths(self) -> dict[str, int]:
        return {op.result: op.width for op in self.ops if op.result is not None}

    def pins(self) -> list[Operation]:
        return [op for op in self.ops if op.kind is OpKind.PIN]

    def sinks(self) -> list[Operation]:
        return [op for op in self.ops if op.kind is OpKind.SINK]

    def register_count(self) -> int:
        return sum(op.attrs["delay"] for op in self.ops if op.kind is OpKind.DELAY)

    def register_bits(self) -> int:
        return sum(op.attrs["delay"] * op.width for op in self.ops if op.kind is OpKind.DELAY)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    value: str | None
    message: str

    def __str__(self):
        where = f" [{self.value}]" if self.value else ""
        return f"{self.kind}{where}: {self.message}"


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class ValidationError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


# --------------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>//[^\n]*)
  | (?P<nl>\n)
  | (?P<value>%[A-Za-z0-9_.$]+)
  | (?P<type>i[0-9]+(?![A-Za-z0-9_]))
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.$]*)
  | (?P<punct>\+:|[{}=:,\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            toks.append(_Tok("nl", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, skip_nl=True) -> _Tok:
        if skip_nl:
            while self.toks[self.i].kind == "nl":
                self.i += 1
        return self.toks[self.i]

    def next(self, skip_nl=True) -> _Tok:
        tok = self.peek(skip_nl)
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek(False)
        raise ParseError(msg, tok.line, tok.col)

    def expect(self, kind, text=None, skip_nl=False) -> _Tok:
        tok = self.next(skip_nl)
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or tok.kind
            raise ParseError(f"expected {want!r}, got {got!r}", tok.line, tok.col)
        return tok

    def accept(self, kind, text=None) -> bool:
        tok = self.peek(False)
        if tok.kind == kind and (text is None or tok.text == text):
            self.i += 1
            return True
        return False

    def end_of_line(self):
        tok = self.peek(False)
        if tok.kind == "nl":
            self.i += 1
        elif not (tok.kind == "punct" and tok.text == "}") and tok.kind != "eof":
            self.fail(f"expected end of line, got {tok.text!r}")

    def type_width(self) -> int:
        tok = self.expect("type")
        return int(tok.text[1:])

    def value_list(self) -> list[str]:
        vals = [self.expect("value").text]
        while self.accept("punct", ","):
            vals.append(self.expect("value").text)
        return vals

    def int_lit(self) -> int:
        return int(self.expect("int").text)

    def design(self) -> Design:
        self.expect("ident", "design", skip_nl=True)
        name = self.expect("ident").text
        self.expect("punct", "{")
        ops = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                self.next()
                break
            if tok.kind == "eof":
                self.fail("unterminated design body, expected '}'", tok)
            ops.append(self.line())
        if self.peek().kind != "eof":
            self.fail("trailing input after design body", self.peek())
        return Design(name, ops)

    def line(self) -> Operation:
        tok = self.next()
        if tok.kind == "ident" and tok.text == "sink":
            operands = self.value_list()
            self.expect("punct", ":")
            widths = [self.type_width()]
            while self.accept("punct", ","):
                widths.append(self.type_width())
            self.end_of_line()
            if len(widths) != len(operands):
                raise ParseError(
                    f"sink has {len(operands)} operands but {len(widths)} types", tok.line, tok.col
                )
            return Operation(OpKind.SINK, None, operands, {"widths": widths})
        if tok.kind != "value":
            raise ParseError(f"expected a value definition or 'sink', got {tok.text!r}", tok.line, tok.col)
        result = tok.text
        self.expect("punct", "=")
        kw = self.expect("ident")
        try:
            kind = OpKind(kw.text)
        except ValueError:
            raise ParseError(f"unknown operation {kw.text!r}", kw.line, kw.col) from None
        attrs = {}
        if kind is OpKind.PIN:
            operands = []
        elif kind is OpKind.CONST:
            operands = []
            attrs["value"] = self.int_lit()
        elif kind is OpKind.DELAY:
            operands = [self.expect("value").text]
            self.expect("ident", "by")
            attrs["delay"] = self.int_lit()
        elif kind in (OpKind.BUBBLE, OpKind.NOT):
            operands = [self.expect("value").text]
        elif kind is OpKind.EXTRACT:
            operands = [self.expect("value").text]
            self.expect("punct", "[")
            attrs["low"] = self.int_lit()
            self.expect("punct", "+:")
            attrs["width"] = self.int_lit()
            self.expect("punct", "]")
        elif kind is OpKind.SINK:
            self.fail("'sink' does not define a value", kw)
        else:
            operands = self.value_list()
            if kind is OpKind.MUX and len(operands) != 3:
                raise ParseError("mux takes exactly 3 operands", kw.line, kw.col)
            if kind in VARIADIC and len(operands) < 2:
                raise ParseError(f"{kind.value} takes at least 2 operands", kw.line, kw.col)
        self.expect("punct", ":")
        width = self.type_width()
        self.end_of_line()
        return Operation(kind, result, operands, attrs, width)


# --------------------------------------------------------------------------- validation

def _check_widths(op: Operation, widths: dict[str, int]) -> list[Diagnostic]:
    out = []
    name = op.result or (op.operands[0] if op.operands else None)

    def bad(msg):
        out.append(Diagnostic("WidthMismatch", name, msg))

    if op.kind is not OpKind.SINK and not (1 <= op.width <= MAX_WIDTH):
        out.append(Diagnostic("BadWidth", name, f"width {op.width} outside [1, {MAX_WIDTH}]"))
        return out
    if any(v not in widths for v in op.operands):
        return out
    ow = op.operand_widths(widths)
    k = op.kind
    if k is OpKind.SINK:
        for v, w, t in zip(op.operands, ow, op.attrs["widths"]):
            if w != t:
                bad(f"sink operand {v} is i{w}, annotated i{t}")
    elif k is OpKind.CONST:
        if op.attrs["value"] >= 1 << op.width:
            out.append(Diagnostic("BadAttribute", name, f"constant {op.attrs['value']} does not fit i{op.width}"))
    elif k is OpKind.DELAY:
        if op.attrs["delay"] < 1:
            out.append(Diagnostic("BadAttribute", name, "delay count must be >= 1"))
        if ow[0] != op.width:
            bad(f"delay of i{ow[0]} annotated i{op.width}")
    elif k in (OpKind.BUBBLE, OpKind.NOT):
        if ow[0] != op.width:
            bad(f"{k.value} of i{ow[0]} annotated i{op.width}")
    elif k in VARIADIC:
        if any(w != op.width for w in ow):
            bad(f"{k.value} operands {['i%d' % w for w in ow]} must all be i{op.width}")
    elif k is OpKind.MUX:
        if ow[0] != 1:
            bad(f"mux select must be i1, got i{ow[0]}")
        if ow[1] != op.width or ow[2] != op.width:
            bad(f"mux arms i{ow[1]}/i{ow[2]} must be i{op.width}")
    elif k is OpKind.CONCAT:
        if sum(ow) != op.width:
            bad(f"concat of total width {sum(ow)} annotated i{op.width}")
    elif k is OpKind.EXTRACT:
        lo, w = op.attrs["low"], op.attrs["width"]
        if w < 1 or lo + w > ow[0]:
            out.append(Diagnostic("BadAttribute", name, f"extract [{lo} +: {w}] out of range for i{ow[0]}"))
        if w != op.width:
            bad(f"extract of {w} bits annotated i{op.width}")
    return out


def find_comb_cycle(d: Design) -> list[str] | None:
    """Return the value names of one cycle that avoids every delay, or None."""
    defs = d.defs()
    succ: dict[str, list[str]] = {v: [] for v in defs}
    for op in d.ops:
        if op.result is None or op.kind is OpKind.DELAY:
            continue
        for v in op.operands:
            if v in defs:
                succ[v].append(op.result)
    color = dict.fromkeys(defs, 0)
    for root in defs:
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                path.pop()
            elif color[nxt] == 1:
                return path[path.index(nxt):]
            elif color[nxt] == 0:
                color[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
                path.append(nxt)
    return None


def validate(d: Design) -> list[Diagnostic]:
    diags = []
    widths: dict[str, int] = {}
    for op in d.ops:
        if op.result is None:
            continue
        if op.result in widths:
            diags.append(Diagnostic("DuplicateDefinition", op.result, "value defined more than once"))
        widths[op.result] = op.width
    if not d.pins() or not d.sinks():
        diags.append(Diagnostic("MissingBoundary", None, "design needs at least one pin and one sink (no Pin/Sink)"))
    for op in d.ops:
        for v in op.operands:
            if v not in widths:
                diags.append(Diagnostic("UndefinedValue", v, "use of a value that is never defined (use-before-def)"))
        diags.extend(_check_widths(op, widths))
    uses: dict[str, int] = {}
    for op in d.ops:
        for v in op.operands:
            uses[v] = uses.get(v, 0) + 1
    for op in d.ops:
        if op.kind is OpKind.BUBBLE and uses.get(op.result, 0) < 2:
            diags.append(Diagnostic("BubbleFanout", op.result, "bubble must feed at least two uses"))
    if not any(dg.kind in ("DuplicateDefinition", "UndefinedValue") for dg in diags):
        cycle = find_comb_cycle(d)
        if cycle:
            diags.append(Diagnostic("CombinationalCycle", cycle[0], "cycle without a delay: " + " -> ".join(cycle + [cycle[0]])))
    return diags


# --------------------------------------------------------------------------- ordering / printing

def canonical_order(d: Design) -> list[Operation]:
    """Canonical op order.

    Ops other than delays and bubbles are sorted topologically over def-use
    edges, ties broken by input position.  A bubble is keyed just ahead of
    its earliest reader, and each delay is placed right before its first
    reader (a delay read only by delays goes before that delay), ties by
    name.  Delay operands never constrain the order, so feedback loops stay
    printable, and the result does not depend on where delays and bubbles sat
    in the input.
    """
    import heapq

    ops = [op for op in d.ops if op.kind is not OpKind.DELAY]
    producer = {op.result: i for i, op in enumerate(ops) if op.result is not None}
    key = _bubble_keys(d, ops)
    indeg = [0] * len(ops)
    succ: list[list[int]] = [[] for _ in ops]
    for i, op in enumerate(ops):
        for v in op.operands:
            j = producer.get(v)
            if j is not None:
                succ[j].append(i)
                indeg[i] += 1
    ready = [(key[i], i) for i in range(len(ops)) if indeg[i] == 0]
    heapq.heapify(ready)
    body = []
    while ready:
        _, i = heapq.heappop(ready)
        body.append(ops[i])
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(ready, (key[j], j))
    if len(body) != len(ops):
        raise ValidationError([Diagnostic("CombinationalCycle", None, "cannot order a cyclic design")])
    return _place_delays(body, [op for op in d.ops if op.kind is OpKind.DELAY])


def _bubble_keys(d: Design, ops: list[Operation]) -> list[tuple]:
    """Heap keys: regular ops by rank among regular ops, bubbles by their first reader."""
    floating = (OpKind.DELAY, OpKind.BUBBLE)
    rank: dict[int, int] = {}
    for i, op in enumerate(ops):
        if op.kind is not OpKind.BUBBLE:
            rank[i] = len(rank)
    key: list[tuple] = [(rank[i], 1, "") if i in rank else None for i in range(len(ops))]
    readers: dict[str, list[Operation]] = {}
    for op in d.ops:
        for v in op.operands:
            readers.setdefault(v, []).append(op)
    pos = {id(op): rank[i] for i, op in enumerate(ops) if i in rank}
    for i, op in enumerate(ops):
        if op.kind is not OpKind.BUBBLE:
            continue
        best, seen, frontier = len(rank), {op.result}, [op.result]
        while frontier:
            nxt = []
            for v in frontier:
                for r in readers.get(v, []):
                    if r.kind in floating:
                        if r.result not in seen:
                            seen.add(r.result)
                            nxt.append(r.result)
                    else:
                        best = min(best, pos[id(r)])
            frontier = nxt
        key[i] = (best, 0, op.result)
    return key


def _place_delays(body: list[Operation], delays: list[Operation]) -> list[Operation]:
    first_use: dict[str, int] = {}
    for k, op in enumerate(body):
        for v in op.operands:
            first_use.setdefault(v, k)
    delay_readers: dict[str, list[str]] = {}
    for op in delays:
        delay_readers.setdefault(op.operands[0], []).append(op.result)

    def anchor(v: str) -> tuple[int, int]:
        # earliest non-delay reader reachable through delays, and the
        # shortest chain to it; BFS keeps rings well defined
        best = (len(body), 0)
        dist = {v: 0}
        frontier = [v]
        while frontier:
            nxt = []
            for u in frontier:
                if u in first_use:
                    best = min(best, (first_use[u], dist[u]))
                for r in delay_readers.get(u, []):
                    if r not in dist:
                        dist[r] = dist[u] + 1
                        nxt.append(r)
            frontier = nxt
        return best

    slots: dict[int, list] = {}
    for op in delays:
        pos, depth = anchor(op.result)
        slots.setdefault(pos, []).append((-depth, op.result, op))
    out: list[Operation] = []
    for k in range(len(body) + 1):
        out.extend(op for _, _, op in sorted(slots.get(k, []), key=lambda t: t[:2]))
        if k < len(body):
            out.append(body[k])
    return out


def format_op(op: Operation) -> str:
    k = op.kind
    if k is OpKind.SINK:
        types = ", ".join(f"i{w}" for w in op.attrs["widths"])
        return f"sink {', '.join(op.operands)} : {types}"
    if k is OpKind.PIN:
        body = "pin"
    elif k is OpKind.CONST:
        body = f"const {op.attrs['value']}"
    elif k is OpKind.DELAY:
        body = f"delay {op.operands[0]} by {op.attrs['delay']}"
    elif k is OpKind.EXTRACT:
        body = f"extract {op.operands[0]} [{op.attrs['low']} +: {op.attrs['width']}]"
    else:
        body = f"{k.value} {', '.join(op.operands)}"
    return f"{op.result} = {body} : i{op.width}"


def print_design(d: Design) -> str:
    lines = [f"design {d.name} {{"]
    lines += ["  " + format_op(op) for op in canonical_order(d)]
    lines.append("}")
    return "\n".join(lines) + "\n"


def parse_design(text: str) -> Design:
    """Parse and validate; the returned design's ops are in canonical order."""
    d = _Parser(text).design()
    diags = validate(d)
    if diags:
        raise ValidationError(diags)
    return Design(d.name, canonical_order(d))
