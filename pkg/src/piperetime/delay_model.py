"""Delay estimates for combinational nodes.

Two variants share one interface: a lookup table with interpolation and a
gradient-boosted ensemble of shallow regression trees fitted on samples.
Both map (kind, operand count, width) to picoseconds.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .ir import OpKind
from .wgraph import Role, WGraph

FORMAT_VERSION = 1
FALLBACK_RULE = "same-kind;nearest-operands;linear-width;clamp"


class UnknownKind(KeyError):
    def __init__(self, kind, node=None):
        self.kind = kind
        self.node = node
        where = f" (node {node})" if node is not None else ""
        super().__init__(f"no delay data for kind '{kind.value}'{where}")


@dataclass(frozen=True)
class OpFeatures:
    kind: OpKind
    operand_count: int
    width: int


@dataclass(frozen=True)
class DelaySample:
    features: OpFeatures
    delay_ps: float


@dataclass
class FitConfig:
    n_trees: int = 100
    depth: int = 2
    learning_rate: float = 0.1
    seed: int = 0


def _clog2(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))


def analytic_delay(kind: OpKind, operand_count: int, width: int) -> float:
    """Shape of the shipped table: carry chains grow with width, bitwise ops do not."""
    levels = _clog2(operand_count)
    if kind in (OpKind.ADD, OpKind.SUB):
        return float((20 + 6 * width) * levels)
    if kind is OpKind.MUL:
        return float((30 + 12 * width) * levels)
    if kind in (OpKind.AND, OpKind.OR, OpKind.XOR):
        return float(10 * levels)
    if kind is OpKind.NOT:
        return 6.0
    if kind is OpKind.MUX:
        return 15.0
    return 0.0


_TABLE_WIDTHS = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096)
_COMB_KINDS = [k for k in OpKind if k.is_comb]


class DelayModel:
    variant = "abstract"

    def predict(self, f: OpFeatures) -> float:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")


class TableModel(DelayModel):
    variant = "table"

    def __init__(self, entries: dict[tuple[OpKind, int, int], float]):
        self.entries = dict(entries)
        self._by_kind: dict[OpKind, dict[int, list[tuple[int, float]]]] = {}
        for (k, oc, w), d in sorted(self.entries.items(), key=lambda kv: (kv[0][0].value, kv[0][1], kv[0][2])):
            self._by_kind.setdefault(k, {}).setdefault(oc, []).append((w, d))

    def predict(self, f: OpFeatures) -> float:
        hit = self.entries.get((f.kind, f.operand_count, f.width))
        if hit is not None:
            return max(0.0, float(hit))
        per_oc = self._by_kind.get(f.kind)
        if not per_oc:
            raise UnknownKind(f.kind)
        oc = min(per_oc, key=lambda c: (abs(c - f.operand_count), c))
        pts = per_oc[oc]
        ws = [w for w, _ in pts]
        if f.width <= ws[0]:
            return max(0.0, pts[0][1])
        if f.width >= ws[-1]:
            return max(0.0, pts[-1][1])
        j = int(np.searchsorted(ws, f.width))
        (w0, d0), (w1, d1) = pts[j - 1], pts[j]
        if w1 == f.width:
            return max(0.0, d1)
        t = (f.width - w0) / (w1 - w0)
        return max(0.0, d0 + t * (d1 - d0))

    def to_json(self) -> dict:
        rows = [[k.value, oc, w, d] for (k, oc, w), d in self.entries.items()]
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        return {"format_version": FORMAT_VERSION, "variant": "table",
                "fallback_rule": FALLBACK_RULE, "entries": rows}


def default_model() -> TableModel:
    entries = {}
    for kind in _COMB_KINDS:
        counts = [0] if kind is OpKind.CONST else range(1, 9)
        for oc in counts:
            for w in _TABLE_WIDTHS:
                entries[(kind, oc, w)] = analytic_delay(kind, oc, w)
    return TableModel(entries)


# ---------------------------------------------------------------------- boosted trees

def _encode(feats: list[OpFeatures], kinds: list[OpKind]) -> np.ndarray:
    X = np.zeros((len(feats), len(kinds) + 2))
    col = {k: i for i, k in enumerate(kinds)}
    for r, f in enumerate(feats):
        if f.kind in col:
            X[r, col[f.kind]] = 1.0
        X[r, -2] = f.operand_count
        X[r, -1] = f.width
    return X


def _best_split(X, r):
    """Least-squares split over all features; returns (feature, threshold) or None."""
    n = len(r)
    best = (0.0, None)
    total = r.sum()
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, rs = X[order, j], r[order]
        csum = np.cumsum(rs)[:-1]
        left_n = np.arange(1, n)
        valid = xs[1:] != xs[:-1]
        if not valid.any():
            continue
        gain = csum ** 2 / left_n + (total - csum) ** 2 / (n - left_n)
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        g = gain[i] - total ** 2 / n
        if g > best[0] + 1e-12:
            best = (g, (j, 0.5 * (xs[i] + xs[i + 1])))
    return best[1]


def _grow(X, r, depth):
    if depth == 0 or len(r) < 2:
        return float(r.mean()) if len(r) else 0.0
    split = _best_split(X, r)
    if split is None:
        return float(r.mean())
    j, t = split
    m = X[:, j] <= t
    return {"feature": int(j), "threshold": float(t),
            "left": _grow(X[m], r[m], depth - 1), "right": _grow(X[~m], r[~m], depth - 1)}


def _eval(tree, X):
    if not isinstance(tree, dict):
        return np.full(len(X), tree)
    m = X[:, tree["feature"]] <= tree["threshold"]
    out = np.empty(len(X))
    out[m] = _eval(tree["left"], X[m])
    out[~m] = _eval(tree["right"], X[~m])
    return out


class FittedModel(DelayModel):
    variant = "fitted"

    def __init__(self, kinds, init, learning_rate, trees, config: FitConfig | None = None):
        self.kinds = list(kinds)
        self.init = float(init)
        self.learning_rate = float(learning_rate)
        self.trees = trees
        self.config = config or FitConfig()

    def predict_many(self, feats: list[OpFeatures]) -> np.ndarray:
        for f in feats:
            if f.kind not in self.kinds:
                raise UnknownKind(f.kind)
        X = _encode(feats, self.kinds)
        y = np.full(len(feats), self.init)
        for t in self.trees:
            y += self.learning_rate * _eval(t, X)
        return np.maximum(y, 0.0)

    def predict(self, f: OpFeatures) -> float:
        return float(self.predict_many([f])[0])

    def to_json(self) -> dict:
        return {"format_version": FORMAT_VERSION, "variant": "fitted",
                "fallback_rule": "tree-ensemble", "kinds": [k.value for k in self.kinds],
                "init": self.init, "learning_rate": self.learning_rate,
                "config": {"n_trees": self.config.n_trees, "depth": self.config.depth,
                           "learning_rate": self.config.learning_rate, "seed": self.config.seed},
                "trees": self.trees}


def fit(samples: list[DelaySample], config: FitConfig | None = None) -> FittedModel:
    """Least-squares gradient boosting of depth-limited trees."""
    config = config or FitConfig()
    if len(samples) < 2:
        raise ValueError("need at least two samples to fit a delay model")
    rng = np.random.default_rng(config.seed)
    # a fixed permutation keeps split tie-breaking reproducible yet seed-dependent
    perm = rng.permutation(len(samples))
    samples = [samples[i] for i in perm]
    kinds = sorted({s.features.kind for s in samples}, key=lambda k: k.value)
    X = _encode([s.features for s in samples], kinds)
    y = np.array([s.delay_ps for s in samples], dtype=np.float64)
    init = float(y.mean())
    pred = np.full(len(y), init)
    trees = []
    for _ in range(config.n_trees):
        tree = _grow(X, y - pred, config.depth)
        trees.append(tree)
        pred += config.learning_rate * _eval(tree, X)
    return FittedModel(kinds, init, config.learning_rate, trees, config)


def baseline_mse(samples: list[DelaySample]) -> float:
    """MSE of the constant (mean) predictor on ``samples``."""
    y = np.array([s.delay_ps for s in samples])
    return float(np.mean((y - y.mean()) ** 2))


def mse(model: DelayModel, samples: list[DelaySample]) -> float:
    y = np.array([s.delay_ps for s in samples])
    p = np.array([model.predict(s.features) for s in samples])
    return float(np.mean((y - p) ** 2))


def r2_score(model: DelayModel, samples: list[DelaySample]) -> float:
    y = np.array([s.delay_ps for s in samples])
    if isinstance(model, FittedModel):
        p = model.predict_many([s.features for s in samples])
    else:
        p = np.array([model.predict(s.features) for s in samples])
    ss_res = float(np.sum((y - p) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else float(ss_res == 0)


def predict(m: DelayModel, f: OpFeatures) -> float:
    return m.predict(f)


# ---------------------------------------------------------------------- IO

def load_model(path) -> DelayModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_json(doc)


def model_from_json(doc: dict) -> DelayModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported delay model format_version {doc.get('format_version')!r}")
    if doc["variant"] == "table":
        return TableModel({(OpKind(k), int(oc), int(w)): float(d) for k, oc, w, d in doc["entries"]})
    if doc["variant"] == "fitted":
        cfg = FitConfig(**doc.get("config", {}))
        return FittedModel([OpKind(k) for k in doc["kinds"]], doc["init"], doc["learning_rate"],
                           doc["trees"], cfg)
    raise ValueError(f"unknown delay model variant {doc['variant']!r}")


def read_samples(path) -> list[DelaySample]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            d = float(row["delay_ps"])
            if d < 0:
                raise ValueError(f"negative delay in sample {row}")
            f = OpFeatures(OpKind(row["kind"].strip().lower()), int(row["operands"]), int(row["width"]))
            out.append(DelaySample(f, d))
    return out


def write_samples(path, samples: list[DelaySample]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["kind", "operands", "width", "delay_ps"])
        for s in samples:
            wr.writerow([s.features.kind.value, s.features.operand_count, s.features.width,
                         repr(float(s.delay_ps))])


def synthetic_samples(n: int, seed: int = 0, noise: float = 0.02,
                      kinds=(OpKind.ADD, OpKind.SUB, OpKind.MUL, OpKind.AND, OpKind.OR,
                             OpKind.XOR, OpKind.MUX, OpKind.NOT)) -> list[DelaySample]:
    """Latin-hypercube draws from the analytic shape with multiplicative noise.

    Each of kind, operand count and log2(width) is cut into ``n`` strata that
    are permuted independently, so every axis is covered evenly.  Widths span
    1..64; variadic kinds take 2..4 operands, mux 3 and not 1.
    """
    rng = np.random.default_rng(seed)

    def axis():
        return (rng.permutation(n) + rng.random(n)) / n

    u_kind, u_oc, u_w = axis(), axis(), axis()
    out = []
    for i in range(n):
        kind = kinds[min(int(u_kind[i] * len(kinds)), len(kinds) - 1)]
        if kind is OpKind.NOT:
            oc = 1
        elif kind is OpKind.MUX:
            oc = 3
        else:
            oc = 2 + min(int(u_oc[i] * 3), 2)
        width = int(np.rint(2 ** (u_w[i] * 6)))
        clean = analytic_delay(kind, oc, width)
        d = clean * (1.0 + noise * rng.standard_normal())
        out.append(DelaySample(OpFeatures(kind, oc, width), max(0.0, d)))
    return out


# ---------------------------------------------------------------------- graph annotation

def features_of(nd) -> OpFeatures:
    return OpFeatures(nd.kind, nd.operand_count, nd.width)


def annotate(g: WGraph, m: DelayModel) -> WGraph:
    """Copy of ``g`` with every comb node's delta set from ``m``."""
    out = g.copy()
    for nd in out.nodes:
        if nd.role is Role.COMB:
            try:
                nd.delta = float(m.predict(features_of(nd)))
            except UnknownKind as exc:
                raise UnknownKind(exc.kind, nd.id) from None
        else:
            nd.delta = 0.0
    return out
