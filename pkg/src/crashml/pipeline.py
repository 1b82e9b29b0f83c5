"""End-to-end run: split, cluster, cross-validate, refit, test, rank.

Every stage seed is derived from ``RunConfig.seed``:

=================  ===================================
stage              seed
=================  ===================================
train/test split   ``subseed(seed, "split")``
k-means            ``subseed(seed, "cluster")``
CV folds + fits    ``subseed(seed, "cv")``
final fit          ``subseed(seed, "final")``
ranking folds      ``subseed(seed, "rank")``
=================  ===================================
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import ensemble, evaluation, ranking
from .dataset import Dataset, stratified_split
from .dtree import TreeParams
from .errors import CrashMLError
from .evaluation import MetricsReport, PRCurve
from .resample import ResamplePlan
from .seeding import resolve_seed, subseed
from .spatial import ClusterModel, assign_clusters, cluster_dataset
from .svm import KernelSpec, SmoParams


class StageError(CrashMLError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (CrashMLError, ValueError, OSError, KeyError) as exc:
        raise StageError(name, exc) from exc


ARTIFACTS = {
    "metrics": "metrics.json",
    "pr_curve": "pr_curve.csv",
    "ranking": "ranking.csv",
    "ranking_json": "ranking.json",
    "model": "model.json",
}


@dataclass
class RunConfig:
    seed: int | None = None
    test_fraction: float = 0.2
    folds: int = 10
    resample: ResamplePlan = field(default_factory=ResamplePlan)
    smo: SmoParams = field(default_factory=SmoParams)
    tree: TreeParams = field(default_factory=TreeParams)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    n_bags: int = 100
    k_clusters: int = 10
    alpha: float = 0.05
    model: str = "vote"
    threads: int = 1
    input: str | None = None
    out_dir: str = "."

    def __post_init__(self):
        if self.model not in ensemble.MODEL_KINDS:
            raise ValueError(f"model must be one of {ensemble.MODEL_KINDS}")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.n_bags < 1 or self.threads < 1 or self.k_clusters < 0:
            raise ValueError("n_bags and threads must be positive; k_clusters non-negative")

    @property
    def root_seed(self) -> int:
        return resolve_seed(self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seed"] = self.root_seed
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        nested = {"resample": ResamplePlan, "smo": SmoParams, "tree": TreeParams, "kernel": KernelSpec}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if key in nested:
                allowed = {f.name for f in fields(nested[key])}
                bad = set(value) - allowed
                if bad:
                    raise ValueError(f"unknown {key} keys: {sorted(bad)}")
                value = nested[key](**value)
            kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def override(self, **changes) -> "RunConfig":
        """Copy with every non-None keyword applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


@dataclass
class RunResult:
    config: RunConfig
    validation: dict[str, MetricsReport]
    test: MetricsReport
    curve: PRCurve
    ranked: list[ranking.RankedAttribute]
    model: ensemble.VotingModel
    clusters: ClusterModel | None
    n_train: int
    n_test: int
    test_ids: np.ndarray = field(repr=False)

    def metrics_json(self) -> str:
        doc = {
            "model": self.config.model,
            "seed": str(self.config.root_seed),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "validation": {k: v.to_dict() for k, v in self.validation.items()},
            "test": self.test.to_dict(),
        }
        return json.dumps(doc, indent=2) + "\n"

    def model_json(self) -> str:
        doc = self.model.to_dict()
        doc["clusters"] = self.clusters.to_dict() if self.clusters is not None else None
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        texts = {
            "metrics": self.metrics_json(),
            "pr_curve": self.curve.to_csv(),
            "ranking": ranking.ranking_csv(self.ranked),
            "ranking_json": ranking.ranking_json(self.ranked),
            "model": self.model_json(),
        }
        paths = {}
        for key, text in texts.items():
            path = out / ARTIFACTS[key]
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_text(text, encoding="utf-8")
            os.replace(tmp, path)
            paths[key] = path
        return paths


def _member_predictions(model: ensemble.VotingModel, data: Dataset) -> dict[str, np.ndarray]:
    parts = model.member_proba(data)
    out = dict(zip(model.names, parts))
    out["vote"] = ensemble.average(parts)
    return out


def _report(proba: np.ndarray, labels) -> MetricsReport:
    return evaluation.evaluate(proba[:, 1], labels, ensemble.predict_class(proba))


def cluster_split(train: Dataset, test: Dataset, k: int, seed: int):
    """Fit k-means on the training coordinates and label both sides with it."""
    if k == 0 or not train.has_location.any():
        return train, test, None
    train, model = cluster_dataset(train, k, seed)
    return train, assign_clusters(test, model), model


def run_split(train: Dataset, test: Dataset, config: RunConfig) -> RunResult:
    """Everything after the split.  ``test`` is only touched by the final scoring."""
    seed = config.root_seed
    with stage("cluster"):
        train, test, clusters = cluster_split(train, test, config.k_clusters, subseed(seed, "cluster"))

    def learner(data: Dataset, s: int) -> ensemble.VotingModel:
        return ensemble.train_pipeline(data, None, config.smo, config.tree, config.n_bags, s, config.kernel, config.model)

    with stage("cross-validation"):
        cv = evaluation.cross_val_predict(
            learner, train, config.folds, config.resample, subseed(seed, "cv"),
            predict=_member_predictions, threads=config.threads,
        )
        validation = {name: _report(p, cv.labels) for name, p in cv.proba.items()}
    with stage("train"):
        model = ensemble.train_pipeline(
            train, config.resample, config.smo, config.tree, config.n_bags,
            subseed(seed, "final"), config.kernel, config.model, config.threads,
        )
    with stage("evaluate"):
        proba = model.predict_proba(test)
        report = _report(proba, test.labels)
        curve = evaluation.pr_curve(proba[:, 1], np.where(test.labels == 1, 1, -1))
    with stage("rank"):
        ranked = ranking.rank_attributes(train, config.folds, config.alpha, subseed(seed, "rank"))
    return RunResult(config, validation, report, curve, ranked, model, clusters, len(train), len(test), test.ids.copy())


def run(dataset: Dataset, config: RunConfig) -> RunResult:
    with stage("split"):
        train, test = stratified_split(dataset, config.test_fraction, subseed(config.root_seed, "split"))
    return run_split(train, test, config)


def load_bundle(text: str) -> tuple[ensemble.VotingModel, ClusterModel | None]:
    """Model and cluster centroids from a ``model.json`` written by :func:`run`."""
    data = json.loads(text)
    clusters = data.get("clusters")
    model = ensemble.VotingModel.from_dict(data)
    return model, ClusterModel.from_dict(clusters) if clusters else None


def evaluate_saved(model_text: str, dataset: Dataset) -> tuple[MetricsReport, PRCurve]:
    model, clusters = load_bundle(model_text)
    if clusters is not None and dataset.has_location.any():
        dataset = assign_clusters(dataset, clusters)
    proba = model.predict_proba(dataset)
    return _report(proba, dataset.labels), evaluation.pr_curve(proba[:, 1], np.where(dataset.labels == 1, 1, -1))

