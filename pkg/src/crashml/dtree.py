"""C4.5-style decision trees over categorical attributes.

Multiway splits chosen by gain ratio, subtree-replacement pruning with the
C4.5 pessimistic error estimate, and Laplace-smoothed leaf probabilities.
Training accepts per-row weights so a bootstrap sample can be passed as
multiplicities instead of duplicated rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Union

import numpy as np
from scipy.special import entr

from .dataset import Dataset, Schema

# gains at or below this are treated as zero
GAIN_EPS = 1e-10
# ratios within this of the best count as tied; ties go to schema order
RATIO_TIE = 1e-12


@dataclass(frozen=True)
class TreeParams:
    min_leaf: float = 2
    pruning_confidence: float = 0.25
    use_laplace: bool = True
    prune: bool = True

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if not 0.0 < self.pruning_confidence <= 0.5:
            raise ValueError("pruning_confidence must lie in (0, 0.5]")


@dataclass
class Leaf:
    counts: tuple[float, float]


@dataclass
class Node:
    attribute: str
    children: dict[str, "Tree"]
    counts: tuple[float, float]


Tree = Union[Leaf, Node]


def entropy(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum() + 0.0)


_LN2 = math.log(2.0)


def split_scores(table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gain and gain ratio for stacked contingency tables.

    ``table`` has shape ``(attributes, categories, classes)`` of weights and
    every attribute must cover the same rows.  Uses
    ``H = (sum entr(c) - entr(N)) / N`` with ``entr(x) = -x ln x`` so each
    score needs one pass over the cells.
    """
    n = float(table[0].sum())
    if n <= 0:
        z = np.zeros(table.shape[0])
        return z, z
    classes = table[0].sum(axis=0)
    parent = (entr(classes).sum() - entr(n)) / n / _LN2
    branch = table.sum(axis=2)
    s_branch = entr(branch).sum(axis=1)
    cond = (entr(table).sum(axis=(1, 2)) - s_branch) / n / _LN2
    gain = parent - cond
    split_info = (s_branch - entr(n)) / n / _LN2
    ratio = np.zeros_like(gain)
    pos = split_info > 0
    ratio[pos] = gain[pos] / split_info[pos]
    return gain, ratio


def _table(codes: np.ndarray, y: np.ndarray, w: np.ndarray, width: int) -> np.ndarray:
    n_attr = codes.shape[1]
    flat = (np.arange(n_attr) * width + codes) * 2 + y[:, None]
    counts = np.bincount(flat.ravel(), weights=np.repeat(w, n_attr), minlength=n_attr * width * 2)
    return counts.reshape(n_attr, width, 2)


def gain_ratio(dataset: Dataset, attribute: str) -> float:
    col = dataset.schema.index(attribute)
    codes = dataset.codes[:, [col]].astype(np.int64)
    table = _table(codes, dataset.labels.astype(np.int64), np.ones(len(dataset)), dataset.schema.inputs[col].size)
    _, ratio = split_scores(table)
    return float(ratio[0])


def choose_split(table: np.ndarray, min_leaf: float) -> int | None:
    """Index of the attribute to split on, or None when nothing qualifies.

    An attribute qualifies with positive gain and at least two branches
    holding ``min_leaf`` weight.
    """
    gain, ratio = split_scores(table)
    ok = (gain > GAIN_EPS) & ((table.sum(axis=2) >= min_leaf).sum(axis=1) >= 2)
    if not ok.any():
        return None
    best = ratio[ok].max()
    return int(np.flatnonzero(ok & (ratio >= best - RATIO_TIE))[0])


_Z_CACHE: dict[float, float] = {}


def added_errors(n: float, e: float, confidence: float) -> float:
    """Extra errors C4.5 adds to ``e`` observed errors out of ``n`` cases.

    Upper limit of the binomial confidence interval at level ``confidence``
    minus ``e``.
    """
    if n <= 0:
        return 0.0
    if e < 1:
        base = n * (1.0 - confidence ** (1.0 / n))
        if e == 0:
            return base
        return base + e * (added_errors(n, 1.0, confidence) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = _Z_CACHE.get(confidence)
    if z is None:
        z = _Z_CACHE[confidence] = NormalDist().inv_cdf(1.0 - confidence)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n)
    return r * n - e


def leaf_error_estimate(counts, confidence: float) -> float:
    n = float(sum(counts))
    e = n - float(max(counts))
    return e + added_errors(n, e, confidence)


def pessimistic_error(tree: Tree, confidence: float = 0.25) -> float:
    if isinstance(tree, Leaf):
        return leaf_error_estimate(tree.counts, confidence)
    return sum(pessimistic_error(c, confidence) for c in tree.children.values())


class _Grower:
    def __init__(self, schema: Schema, codes, y, w, params: TreeParams):
        self.schema = schema
        self.codes = codes
        self.y = y
        self.w = w
        self.params = params
        self.width = max(schema.sizes)

    def is_leaf(self, counts: tuple[float, float]) -> bool:
        return min(counts) <= 0 or counts[0] + counts[1] < 2 * self.params.min_leaf

    def grow(self, idx: np.ndarray, counts: np.ndarray) -> tuple[Tree, float]:
        """Subtree for rows ``idx`` (class weights ``counts``) and its error estimate."""
        as_tuple = (float(counts[0]), float(counts[1]))
        as_leaf = leaf_error_estimate(as_tuple, self.params.pruning_confidence)
        if self.is_leaf(as_tuple):
            return Leaf(as_tuple), as_leaf
        codes = self.codes[idx]
        table = _table(codes, self.y[idx], self.w[idx], self.width)
        col = choose_split(table, self.params.min_leaf)
        if col is None:
            return Leaf(as_tuple), as_leaf
        attr = self.schema.inputs[col]
        children = {}
        estimate = 0.0
        values = codes[:, col]
        branch = table[col]
        conf = self.params.pruning_confidence
        for code in np.flatnonzero(branch.sum(axis=1) > 0):
            c = (float(branch[code, 0]), float(branch[code, 1]))
            if self.is_leaf(c):
                # skip the row selection for branches that cannot split
                child, err = Leaf(c), leaf_error_estimate(c, conf)
            else:
                child, err = self.grow(idx[values == code], branch[code])
            children[attr.domain[code]] = child
            estimate += err
        if self.params.prune and as_leaf <= estimate:
            return Leaf(as_tuple), as_leaf
        return Node(attr.name, children, as_tuple), estimate


@dataclass
class DecisionTree:
    root: Tree
    schema: Schema
    params: TreeParams = TreeParams()

    def distribution(self, counts) -> np.ndarray:
        c = np.asarray(counts, dtype=np.float64)
        if self.params.use_laplace:
            return (c + 1.0) / (c.sum() + 2.0)
        total = c.sum()
        return c / total if total > 0 else np.full(2, 0.5)

    def predict_proba(self, data: Dataset | np.ndarray) -> np.ndarray:
        """``(n, 2)`` class distributions ``(p_not_fatal, p_fatal)``."""
        codes = data.codes if isinstance(data, Dataset) else np.asarray(data).reshape(-1, len(self.schema.inputs))
        out = np.empty((codes.shape[0], 2))
        self._fill(self.root, codes, np.arange(codes.shape[0]), out)
        return out

    def _fill(self, node: Tree, codes, idx, out) -> None:
        if len(idx) == 0:
            return
        if isinstance(node, Leaf):
            out[idx] = self.distribution(node.counts)
            return
        col = self.schema.index(node.attribute)
        attr = self.schema.inputs[col]
        values = codes[idx, col]
        routed = np.zeros(len(idx), dtype=bool)
        for label, child in node.children.items():
            hit = values == attr.code(label)
            routed |= hit
            self._fill(child, codes, idx[hit], out)
        # categories never seen at this node fall back to its own counts
        out[idx[~routed]] = self.distribution(node.counts)

    def predict(self, data) -> np.ndarray:
        p = self.predict_proba(data)
        return (p[:, 1] > p[:, 0]).astype(np.int8)

    @property
    def depth(self) -> int:
        def walk(t):
            return 0 if isinstance(t, Leaf) else 1 + max(walk(c) for c in t.children.values())
        return walk(self.root)

    @property
    def n_leaves(self) -> int:
        def walk(t):
            return 1 if isinstance(t, Leaf) else sum(walk(c) for c in t.children.values())
        return walk(self.root)

    def to_dict(self) -> dict:
        return {
            "kind": "c45_tree",
            "params": {
                "min_leaf": self.params.min_leaf,
                "pruning_confidence": self.params.pruning_confidence,
                "use_laplace": self.params.use_laplace,
                "prune": self.params.prune,
            },
            "root": _node_to_dict(self.root),
        }

    @classmethod
    def from_dict(cls, data: dict, schema: Schema) -> "DecisionTree":
        return cls(_node_from_dict(data["root"]), schema, TreeParams(**data["params"]))


def _node_to_dict(t: Tree) -> dict:
    if isinstance(t, Leaf):
        return {"node": "leaf", "counts": list(t.counts)}
    return {
        "node": "split",
        "attribute": t.attribute,
        "counts": list(t.counts),
        "children": {k: _node_to_dict(v) for k, v in t.children.items()},
    }


def _node_from_dict(d: dict) -> Tree:
    counts = (float(d["counts"][0]), float(d["counts"][1]))
    if d["node"] == "leaf":
        return Leaf(counts)
    return Node(d["attribute"], {k: _node_from_dict(v) for k, v in d["children"].items()}, counts)


def train_tree(dataset: Dataset, params: TreeParams = TreeParams(), weights=None, seed: int | None = None) -> DecisionTree:
    """Grow and prune a tree; ``weights`` are per-row multiplicities.

    The learner is deterministic given its input order; ``seed`` is accepted
    so every learner shares one calling convention and is otherwise unused.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train a tree on an empty dataset")
    w = np.ones(len(dataset)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (len(dataset),) or (w < 0).any():
        raise ValueError("weights must be a non-negative vector, one per row")
    idx = np.flatnonzero(w > 0)
    grower = _Grower(dataset.schema, dataset.codes.astype(np.int64), dataset.labels.astype(np.int64), w, params)
    root, _ = grower.grow(idx, np.bincount(dataset.labels[idx], weights=w[idx], minlength=2))
    return DecisionTree(root, dataset.schema, params)


def tree_predict_proba(tree: DecisionTree, record) -> tuple[float, float]:
    """Distribution for one :class:`CrashRecord`."""
    codes = np.array([[a.code(record.values[a.name]) for a in tree.schema.inputs]])
    p = tree.predict_proba(codes)[0]
    return float(p[0]), float(p[1])
