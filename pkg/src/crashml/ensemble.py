"""Bagged C4.5 trees and the probability-averaging vote.

Member ``m`` of a bag draws its bootstrap sample from the stream
``substream(seed, "bag", m)`` and records ``subseed(seed, "bag", m)`` as its
member seed, so a bag trained with worker threads is identical to one
trained sequentially.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .dataset import Dataset, Schema
from .dtree import DecisionTree, TreeParams, train_tree
from .errors import CompositionError
from .resample import ResamplePlan, rebalance
from .seeding import substream, subseed
from .svm import KernelSpec, SmoParams, SvmModel, train_svm


class ProbabilisticModel(Protocol):
    schema: Schema

    def predict_proba(self, data) -> np.ndarray: ...


@dataclass
class BaggedModel:
    members: list[DecisionTree]
    member_seeds: list[int]
    schema: Schema = field(repr=False)

    def __post_init__(self):
        if not self.members or len(self.members) != len(self.member_seeds):
            raise CompositionError("a bag needs at least one member and one seed per member")

    def predict_proba(self, data) -> np.ndarray:
        total = self.members[0].predict_proba(data)
        for tree in self.members[1:]:
            total = total + tree.predict_proba(data)
        return total / len(self.members)

    def to_dict(self) -> dict:
        return {
            "kind": "bagging",
            "member_seeds": [str(s) for s in self.member_seeds],
            "members": [t.to_dict() for t in self.members],
        }

    @classmethod
    def from_dict(cls, data: dict, schema: Schema) -> "BaggedModel":
        members = [DecisionTree.from_dict(t, schema) for t in data["members"]]
        return cls(members, [int(s) for s in data["member_seeds"]], schema)


def bootstrap_weights(n: int, seed: int, member: int) -> np.ndarray:
    """Row multiplicities of member ``member``'s bootstrap sample of size ``n``."""
    draws = substream(seed, "bag", member).integers(0, n, size=n)
    return np.bincount(draws, minlength=n).astype(np.float64)


def bag_train(
    train: Dataset,
    n_bags: int = 100,
    params: TreeParams = TreeParams(),
    seed: int = 0,
    bootstrap: bool = True,
    threads: int = 1,
) -> BaggedModel:
    """Fit ``n_bags`` trees on bootstrap samples of ``train``.

    ``bootstrap=False`` trains every member on ``train`` itself; it exists
    for tests of the degenerate bag.
    """
    if len(train) == 0:
        raise ValueError("cannot bag an empty training set")
    if n_bags < 1:
        raise ValueError("n_bags must be at least 1")

    def fit(m: int) -> DecisionTree:
        w = bootstrap_weights(len(train), seed, m) if bootstrap else None
        return train_tree(train, params, weights=w)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            members = list(pool.map(fit, range(n_bags)))
    else:
        members = [fit(m) for m in range(n_bags)]
    return BaggedModel(members, [subseed(seed, "bag", m) for m in range(n_bags)], train.schema)


def bag_predict_proba(model: BaggedModel, record) -> tuple[float, float]:
    codes = np.array([[a.code(record.values[a.name]) for a in model.schema.inputs]])
    p = model.predict_proba(codes)[0]
    return float(p[0]), float(p[1])


@dataclass
class VotingModel:
    """Unweighted mean of member class distributions.

    The predicted class is fatal only when its averaged probability is
    strictly larger; an exact tie goes to not fatal.
    """

    members: list
    names: list[str] | None = None
    combiner: str = "average_probabilities"

    def __post_init__(self):
        if not self.members:
            raise CompositionError("a vote needs at least one member")
        schemas = [getattr(m, "schema", None) for m in self.members]
        known = [s for s in schemas if s is not None]
        if any(s != known[0] for s in known[1:]):
            raise CompositionError("voting members were trained on different schemas")
        if self.names is None:
            self.names = [f"member{i}" for i in range(len(self.members))]
        if len(self.names) != len(self.members):
            raise CompositionError("one name per member is required")

    @property
    def schema(self) -> Schema | None:
        for m in self.members:
            if getattr(m, "schema", None) is not None:
                return m.schema
        return None

    def member_proba(self, data) -> list[np.ndarray]:
        return [np.asarray(m.predict_proba(data), dtype=np.float64) for m in self.members]

    def predict_proba(self, data) -> np.ndarray:
        return average(self.member_proba(data))

    def predict(self, data) -> np.ndarray:
        return predict_class(self.predict_proba(data))

    def to_dict(self) -> dict:
        return {
            "kind": "vote",
            "combiner": self.combiner,
            "schema": self.schema.to_dict() if self.schema is not None else None,
            "members": [{"name": n, "model": m.to_dict()} for n, m in zip(self.names, self.members)],
        }

    @classmethod
    def from_dict(cls, data: dict, schema: Schema | None = None) -> "VotingModel":
        if schema is None:
            schema = Schema.from_dict(data["schema"])
        members, names = [], []
        for entry in data["members"]:
            names.append(entry["name"])
            members.append(model_from_dict(entry["model"], schema))
        return cls(members, names, data.get("combiner", "average_probabilities"))


def average(distributions: Sequence[np.ndarray]) -> np.ndarray:
    total = distributions[0]
    for d in distributions[1:]:
        total = total + d
    return total / len(distributions)


def predict_class(proba: np.ndarray) -> np.ndarray:
    """1 (fatal) where ``p_fatal > p_not_fatal``; ties resolve to 0."""
    proba = np.asarray(proba)
    return (proba[..., 1] > proba[..., 0]).astype(np.int8)


def vote_predict_proba(model: VotingModel, record) -> tuple[float, float]:
    schema = model.schema
    codes = np.array([[a.code(record.values[a.name]) for a in schema.inputs]])
    data = Dataset(schema, codes, [0])
    p = model.predict_proba(data)[0]
    return float(p[0]), float(p[1])


def model_from_dict(data: dict, schema: Schema):
    kind = data["kind"]
    if kind == "smo_svm":
        return SvmModel.from_dict(data, schema)
    if kind == "bagging":
        return BaggedModel.from_dict(data, schema)
    if kind == "c45_tree":
        return DecisionTree.from_dict(data, schema)
    if kind == "vote":
        return VotingModel.from_dict(data, schema)
    raise ValueError(f"unknown model kind {kind!r}")


def dump_model(model) -> str:
    """Canonical JSON text; identical models give identical bytes."""
    return json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def load_model(text: str, schema: Schema | None = None):
    data = json.loads(text)
    if data["kind"] == "vote":
        return VotingModel.from_dict(data, schema)
    if schema is None:
        raise ValueError("a schema is needed to load a bare member model")
    return model_from_dict(data, schema)


MODEL_KINDS = ("smo", "bag", "vote")


def train_pipeline(
    train: Dataset,
    plan: ResamplePlan | None = ResamplePlan(),
    smo: SmoParams = SmoParams(),
    tree: TreeParams = TreeParams(),
    n_bags: int = 100,
    seed: int = 0,
    kernel: KernelSpec = KernelSpec(),
    model: str = "vote",
    threads: int = 1,
) -> VotingModel:
    """Rebalance, fit the SVM and the bag, and assemble the vote.

    ``model`` selects a lone member (``"smo"`` or ``"bag"``) wrapped as a
    one-member vote, or the full ``"vote"``.  ``plan=None`` skips
    rebalancing.  Every random choice, resampling included, is derived from
    ``seed``; the plan's own seed field is ignored here.
    """
    if model not in MODEL_KINDS:
        raise ValueError(f"model must be one of {MODEL_KINDS}")
    data = train
    if plan is not None:
        data = rebalance(train, replace(plan, seed=subseed(seed, "rebalance")))
    members, names = [], []
    if model in ("smo", "vote"):
        members.append(train_svm(data, smo, kernel, subseed(seed, "svm")))
        names.append("smo")
    if model in ("bag", "vote"):
        members.append(bag_train(data, n_bags, tree, subseed(seed, "bagging"), threads=threads))
        names.append("bag")
    return VotingModel(members, names)
