"""Chi-squared ranking of input attributes against the fatality class."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from statistics import NormalDist

import numpy as np
from scipy.special import gammaincc, gammaln

from .dataset import Dataset
from .evaluation import stratified_folds


@dataclass(frozen=True)
class RankedAttribute:
    rank: int
    name: str
    chi2: float
    df: int
    critical: float
    significant: bool


def contingency_table(values, labels) -> tuple[list, np.ndarray]:
    """Observed categories (sorted) and their ``(categories, classes)`` counts."""
    values = np.asarray(values)
    labels = np.asarray(labels)
    cats, v_idx = np.unique(values, return_inverse=True)
    classes, c_idx = np.unique(labels, return_inverse=True)
    table = np.zeros((len(cats), len(classes)))
    np.add.at(table, (v_idx, c_idx), 1.0)
    return list(cats), table


def chi_squared_table(table) -> tuple[float, int]:
    """Pearson statistic of a contingency table; all-zero rows and columns are dropped."""
    t = np.asarray(table, dtype=np.float64)
    t = t[t.sum(axis=1) > 0][:, t.sum(axis=0) > 0]
    if t.size == 0:
        return 0.0, 0
    n = t.sum()
    expected = np.outer(t.sum(axis=1), t.sum(axis=0)) / n
    live = expected > 0
    stat = float((((t - expected) ** 2)[live] / expected[live]).sum())
    return stat, (t.shape[0] - 1) * (t.shape[1] - 1)


def chi_squared(values, labels) -> tuple[float, int]:
    """Statistic and degrees of freedom over observed categories."""
    if len(values) != len(labels):
        raise ValueError("values and labels must have equal length")
    return chi_squared_table(contingency_table(values, labels)[1])


def _chi2_log_pdf(x: float, df: int) -> float:
    k = df / 2.0
    return (k - 1.0) * math.log(x) - x / 2.0 - k * math.log(2.0) - float(gammaln(k))


def wilson_hilferty(df: int, alpha: float) -> float:
    """Cube-root normal approximation to the upper ``alpha`` quantile."""
    z = NormalDist().inv_cdf(1.0 - alpha)
    h = 2.0 / (9.0 * df)
    return df * (1.0 - h + z * math.sqrt(h)) ** 3


def chi2_critical(df: int, alpha: float = 0.05) -> float:
    """Upper ``alpha`` quantile of the chi-squared distribution.

    Starts from the Wilson-Hilferty value, which is 2.5% low at one degree
    of freedom, and polishes it with Newton steps on the exact survival
    function.  ``df`` below 1 is treated as 1.
    """
    if not 0.0 < alpha <= 0.5:
        raise ValueError("alpha must lie in (0, 0.5]")
    df = max(int(df), 1)
    x = max(wilson_hilferty(df, alpha), 1e-8)
    for _ in range(50):
        # survival(x) - alpha, whose derivative is -pdf(x)
        resid = float(gammaincc(df / 2.0, x / 2.0)) - alpha
        step = resid / math.exp(_chi2_log_pdf(x, df))
        nx = x + step
        if nx <= 0:
            nx = x / 2.0
        if abs(nx - x) <= 1e-12 * max(1.0, x):
            return nx
        x = nx
    return x


def fold_statistics(dataset: Dataset, folds: int = 10, seed: int = 0) -> np.ndarray:
    """``(folds, attributes)`` statistics on each fold's training portion."""
    fold_of = stratified_folds(dataset.labels, folds, seed)
    out = np.empty((folds, len(dataset.schema.inputs)))
    for f in range(folds):
        rows = fold_of != f
        y = dataset.labels[rows]
        for j in range(len(dataset.schema.inputs)):
            out[f, j] = chi_squared(dataset.codes[rows, j], y)[0]
    return out


def rank_attributes(dataset: Dataset, folds: int = 10, alpha: float = 0.05, seed: int = 0) -> list[RankedAttribute]:
    """Mean fold statistic per attribute, sorted descending.

    Folds come from the stratified partitioner on the data as given; no
    resampling is applied.  Degrees of freedom use the categories observed in
    ``dataset``.  Equal means keep schema order.
    """
    if dataset.labels.min() == dataset.labels.max():
        raise ValueError("ranking needs both classes")
    stats = fold_statistics(dataset, folds, seed)
    mean = stats.mean(axis=0)
    order = sorted(range(len(mean)), key=lambda j: (-mean[j], j))
    ranked = []
    for r, j in enumerate(order, start=1):
        df = max(len(np.unique(dataset.codes[:, j])) - 1, 0)
        crit = chi2_critical(max(df, 1), alpha)
        chi2 = float(mean[j])
        ranked.append(RankedAttribute(r, dataset.schema.inputs[j].name, chi2, df, crit, df > 0 and chi2 > crit))
    return ranked


def ranking_csv(ranked: list[RankedAttribute]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["rank", "attribute", "chi2", "df", "critical", "significant"])
    for a in ranked:
        w.writerow([a.rank, a.name, repr(a.chi2), a.df, repr(a.critical), str(a.significant).lower()])
    return out.getvalue()


def ranking_json(ranked: list[RankedAttribute]) -> str:
    return json.dumps([asdict(a) for a in ranked], indent=2) + "\n"
