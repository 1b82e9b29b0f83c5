"""SMOTE oversampling of the fatal class followed by majority under-sampling.

All inputs are categorical, so the SMOTE interpolation step is replaced by
a per-attribute coin flip between the source record and its chosen
neighbour, and neighbours are found by Hamming distance over the category
codes (the same ordering as overlap distance in one-hot space).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, concat, round_half_up
from .errors import ResampleError
from .seeding import substream


@dataclass(frozen=True)
class ResamplePlan:
    smote_percent: float = 100.0
    k_neighbors: int = 5
    target_majority_fraction: float = 0.83
    seed: int = 0

    def __post_init__(self):
        if self.smote_percent < 0:
            raise ValueError("smote_percent must be non-negative")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be at least 1")
        if not 0.5 < self.target_majority_fraction < 1.0:
            raise ValueError("target_majority_fraction must lie in (0.5, 1)")


def nearest_neighbors(codes: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows by Hamming distance.

    Ties are broken by row index; a row is never its own neighbour.
    """
    codes = np.asarray(codes)
    m = codes.shape[0]
    dist = (codes[:, None, :] != codes[None, :, :]).sum(axis=2)
    # push self to the end; a stable sort then orders equal distances by index
    dist[np.arange(m), np.arange(m)] = codes.shape[1] + 1
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def smote_codes(codes: np.ndarray, percent: float, k: int = 5, seed: int = 0) -> np.ndarray:
    """Synthetic category-code rows; see :func:`smote`."""
    codes = np.asarray(codes)
    m = codes.shape[0]
    if m < 2:
        raise ResampleError(f"SMOTE needs at least 2 minority records, got {m}")
    n_new = int(math.floor(percent / 100.0 * m + 1e-9))
    if n_new == 0:
        return np.empty((0, codes.shape[1]), dtype=codes.dtype)
    k = min(k, m - 1)
    neighbours = nearest_neighbors(codes, k)

    # every source contributes floor(n_new / m) records; the remainder goes to a seeded subset
    reps = np.full(m, n_new // m)
    extra = n_new - reps.sum()
    if extra:
        chosen = substream(seed, "smote", "sources").choice(m, size=extra, replace=False)
        reps[chosen] += 1

    out = []
    for i in range(m):
        if reps[i] == 0:
            continue
        rng = substream(seed, "smote", i)
        picks = neighbours[i, rng.integers(0, k, size=reps[i])]
        take_source = rng.random((reps[i], codes.shape[1])) < 0.5
        out.append(np.where(take_source, codes[i], codes[picks]))
    return np.concatenate(out).astype(codes.dtype)


def smote(minority: Dataset, percent: float = 100.0, k: int = 5, seed: int = 0) -> Dataset:
    """Emit ``floor(percent/100 * |minority|)`` synthetic fatal records.

    Each source record draws a neighbour uniformly from its ``k`` nearest
    minority neighbours (``k`` capped at ``|minority| - 1``) and each
    attribute of the new record is taken from the source or the neighbour
    with equal probability.  Draws for source ``i`` come from the stream
    ``(seed, "smote", i)``.  Synthetic rows have no location and id ``-1``.
    """
    new = smote_codes(minority.codes, percent, k, seed)
    n = new.shape[0]
    return Dataset(minority.schema, new, np.ones(n, dtype=np.int8), ids=np.full(n, -1))


def undersample(majority: Dataset, target_count: int, seed: int = 0) -> Dataset:
    """Uniform subset without replacement, original row order kept."""
    if target_count < 0 or target_count > len(majority):
        raise ResampleError(f"cannot draw {target_count} rows from a class of {len(majority)}")
    keep = substream(seed, "undersample").choice(len(majority), size=target_count, replace=False)
    return majority.subset(np.sort(keep))


def majority_target(minority_count: int, majority_fraction: float) -> int:
    return round_half_up(minority_count * majority_fraction / (1.0 - majority_fraction))


def rebalance(train: Dataset, plan: ResamplePlan = ResamplePlan()) -> Dataset:
    """SMOTE the fatal class, then under-sample the rest to the target mix.

    Output order: the surviving original rows in input order, then the
    synthetic fatal rows.
    """
    fatal = train.labels == 1
    if fatal.all() or not fatal.any():
        raise ResampleError("rebalancing needs both classes in the training data")
    minority_idx = np.flatnonzero(fatal)
    majority_idx = np.flatnonzero(~fatal)
    synthetic = smote(train.subset(minority_idx), plan.smote_percent, plan.k_neighbors, plan.seed)
    target = majority_target(len(minority_idx) + len(synthetic), plan.target_majority_fraction)
    if target > len(majority_idx):
        raise ResampleError(
            f"reaching {plan.target_majority_fraction:.0%} majority needs {target} non-fatal rows, "
            f"only {len(majority_idx)} available"
        )
    keep = substream(plan.seed, "undersample").choice(len(majority_idx), size=target, replace=False)
    survivors = np.sort(np.concatenate([minority_idx, majority_idx[keep]]))
    return concat([train.subset(survivors), synthetic])
