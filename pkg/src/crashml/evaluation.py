"""Imbalance-aware metrics and the stratified cross-validation harness.

Fatal is the positive class throughout.  Scores are probabilities of the
fatal class unless stated otherwise.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Mapping

import numpy as np
from scipy.stats import rankdata

from .dataset import Dataset
from .errors import ShapeError, StratificationError, UndefinedMetricError
from .resample import ResamplePlan, rebalance
from .seeding import substream, subseed


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class AgreementStats:
    p_o: float
    p_e: float

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "AgreementStats":
        n = cm.total
        p_o = (cm.tp + cm.tn) / n
        p_e = ((cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.fn + cm.tn) * (cm.fp + cm.tn)) / (n * n)
        return cls(p_o, p_e)


def _as_pm1(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.size and not np.isin(y, (-1, 1)).all():
        raise ValueError("labels must be +1 (fatal) or -1 (not fatal)")
    return y


def confusion(scores, labels, threshold: float = 0.5) -> ConfusionMatrix:
    """Tally predictions ``score >= threshold`` against +/-1 labels."""
    s = np.asarray(scores, dtype=np.float64)
    y = _as_pm1(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ShapeError(f"scores {s.shape} and labels {y.shape} must be equal-length vectors")
    if s.size == 0:
        raise ShapeError("at least one prediction is required")
    pred = s >= threshold
    pos = y > 0
    return ConfusionMatrix(
        int((pred & pos).sum()), int((pred & ~pos).sum()), int((~pred & pos).sum()), int((~pred & ~pos).sum())
    )


def accuracy(cm: ConfusionMatrix) -> float:
    return (cm.tp + cm.tn) / cm.total


def precision(cm: ConfusionMatrix) -> float:
    return cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0


def recall(cm: ConfusionMatrix) -> float:
    return cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0


def f1(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), recall(cm)
    return 2 * p * r / (p + r) if p + r else 0.0


def kappa(cm: ConfusionMatrix) -> float:
    # (p_o - p_e) / (1 - p_e) scaled by n^2: integer arithmetic, one rounding
    n = cm.total
    expected = (cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.fn + cm.tn) * (cm.fp + cm.tn)
    if n == 0 or expected >= n * n:
        raise UndefinedMetricError("kappa is undefined when expected agreement is 1")
    return (n * (cm.tp + cm.tn) - expected) / (n * n - expected)


KAPPA_BANDS = (
    (0.20, "slight"),
    (0.40, "fair"),
    (0.60, "moderate"),
    (0.80, "substantial"),
    (1.00, "almost-perfect"),
)


def kappa_band(value: float) -> str:
    """Landis-Koch label; the value is rounded half-up to 2 decimals first."""
    r = float(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))
    if r < 0:
        return "poor"
    for upper, name in KAPPA_BANDS:
        if r <= upper:
            return name
    return KAPPA_BANDS[-1][1]


@dataclass(frozen=True)
class PRCurve:
    thresholds: np.ndarray
    recall: np.ndarray
    precision: np.ndarray

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return [(float(t), float(r), float(p)) for t, r, p in zip(self.thresholds, self.recall, self.precision)]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["threshold", "recall", "precision"])
        for t, r, p in self.points:
            w.writerow([repr(t), repr(r), repr(p)])
        return out.getvalue()


def pr_curve(scores, labels) -> PRCurve:
    """One point per distinct score, thresholds descending.

    The point at threshold ``t`` counts ``score >= t`` as positive.  The
    implicit starting point is recall 0 with precision 1.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _as_pm1(labels)
    if s.shape != y.shape:
        raise ShapeError("scores and labels must have equal length")
    P = int((y > 0).sum())
    if P == 0:
        raise UndefinedMetricError("a PR curve needs at least one positive label")
    order = np.argsort(-s, kind="stable")
    s_sorted, pos_sorted = s[order], (y[order] > 0)
    tp = np.cumsum(pos_sorted)
    fp = np.cumsum(~pos_sorted)
    # keep the last index of each run of equal scores
    last = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tp, fp = tp[last], fp[last]
    return PRCurve(s_sorted[last].copy(), tp / P, tp / (tp + fp))


def auc_pr(curve: PRCurve) -> float:
    """Step-wise average precision: sum of recall increments times precision."""
    r = np.concatenate([[0.0], curve.recall])
    return float(np.sum(np.diff(r) * curve.precision))


def pr_baseline(labels) -> float:
    y = _as_pm1(labels)
    if y.size == 0:
        raise ShapeError("at least one label is required")
    return float((y > 0).sum() / y.size)


def auc_roc(scores, labels) -> float:
    """Mann-Whitney form: P(random positive outranks random negative), ties 1/2."""
    s = np.asarray(scores, dtype=np.float64)
    y = _as_pm1(labels)
    pos = y > 0
    P, N = int(pos.sum()), int((~pos).sum())
    if P == 0 or N == 0:
        raise UndefinedMetricError("AUROC needs both classes")
    ranks = rankdata(s)
    u = ranks[pos].sum() - P * (P + 1) / 2.0
    return float(u / (P * N))


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    kappa: float
    kappa_band: str
    auc_pr: float
    auc_roc: float
    pr_baseline: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def evaluate(proba_fatal, labels01, predictions=None) -> MetricsReport:
    """Full report from fatal-class probabilities and 0/1 labels.

    Class predictions default to ``proba_fatal > 0.5`` (ties go to not
    fatal); ranking metrics use the probabilities.
    """
    p = np.asarray(proba_fatal, dtype=np.float64)
    y = np.where(np.asarray(labels01) == 1, 1, -1)
    pred = (p > 0.5) if predictions is None else np.asarray(predictions).astype(bool)
    cm = confusion(pred.astype(np.float64), y, 0.5)
    try:
        k = kappa(cm)
    except UndefinedMetricError:
        k = float("nan")
    both = 0 < (y > 0).sum() < y.size
    return MetricsReport(
        accuracy=accuracy(cm),
        precision=precision(cm),
        recall=recall(cm),
        f1=f1(cm),
        kappa=k,
        kappa_band=kappa_band(k) if k == k else "undefined",
        auc_pr=auc_pr(pr_curve(p, y)) if (y > 0).any() else float("nan"),
        auc_roc=auc_roc(p, y) if both else float("nan"),
        pr_baseline=pr_baseline(y),
    )


# --------------------------------------------------------------------------
# cross-validation


def stratified_folds(labels, folds: int = 10, seed: int = 0) -> np.ndarray:
    """Fold number (0-based) for every row.

    Each class is shuffled with its own stream and dealt round-robin, so
    fold class counts differ by at most one.
    """
    y = np.asarray(labels)
    if folds < 2:
        raise ValueError("at least 2 folds are required")
    assignment = np.empty(len(y), dtype=np.int64)
    offset = 0
    for k in np.unique(y):
        idx = np.flatnonzero(y == k)
        if len(idx) < folds:
            raise StratificationError(f"class {k} has {len(idx)} rows, fewer than {folds} folds")
        perm = substream(seed, "folds", int(k)).permutation(len(idx))
        assignment[idx[perm]] = (np.arange(len(idx)) + offset) % folds
        offset += len(idx)
    return assignment


Learner = Callable[[Dataset, int], object]


@dataclass
class CVPredictions:
    fold_of: np.ndarray
    labels: np.ndarray
    proba: dict[str, np.ndarray]
    train_ids: list[np.ndarray] = field(default_factory=list, repr=False)

    def report(self, name: str = "model") -> MetricsReport:
        return evaluate(self.proba[name][:, 1], self.labels)


def _default_predict(model, data: Dataset) -> Mapping[str, np.ndarray]:
    return {"model": np.asarray(model.predict_proba(data))}


def cross_val_predict(
    learner: Learner,
    dataset: Dataset,
    folds: int = 10,
    plan: ResamplePlan | None = ResamplePlan(),
    seed: int = 0,
    predict: Callable[[object, Dataset], Mapping[str, np.ndarray]] = _default_predict,
    threads: int = 1,
) -> CVPredictions:
    """Pooled out-of-fold probabilities.

    Fold ``f`` rebalances its training rows with the plan reseeded from
    ``(seed, "cv-rebalance", f)`` and calls ``learner(train, subseed)``; the
    validation rows are never resampled.  ``predict`` maps a fitted model
    and the validation rows to named ``(n, 2)`` distributions.
    """
    fold_of = stratified_folds(dataset.labels, folds, seed)

    def run(f: int):
        train = dataset.subset(np.flatnonzero(fold_of != f))
        valid_idx = np.flatnonzero(fold_of == f)
        if plan is not None:
            fold_plan = ResamplePlan(plan.smote_percent, plan.k_neighbors, plan.target_majority_fraction,
                                     subseed(seed, "cv-rebalance", f))
            train = rebalance(train, fold_plan)
        model = learner(train, subseed(seed, "cv-learner", f))
        return valid_idx, predict(model, dataset.subset(valid_idx)), train.ids

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, range(folds)))
    else:
        results = [run(f) for f in range(folds)]

    proba: dict[str, np.ndarray] = {}
    for valid_idx, out, _ in results:
        for name, p in out.items():
            if name not in proba:
                proba[name] = np.full((len(dataset), 2), np.nan)
            proba[name][valid_idx] = p
    return CVPredictions(fold_of, dataset.labels.copy(), proba, [r[2] for r in results])


def cross_validate(
    learner: Learner,
    dataset: Dataset,
    folds: int = 10,
    plan: ResamplePlan | None = ResamplePlan(),
    seed: int = 0,
    threads: int = 1,
) -> MetricsReport:
    """Metrics of the pooled out-of-fold predictions."""
    return cross_val_predict(learner, dataset, folds, plan, seed, threads=threads).report()
