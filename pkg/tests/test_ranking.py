import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashml.dataset import CRASH_TYPE, Dataset, Effect, generate_synthetic
from crashml.evaluation import stratified_folds
from crashml.ranking import (
    chi2_critical,
    chi_squared,
    chi_squared_table,
    contingency_table,
    fold_statistics,
    rank_attributes,
    ranking_csv,
    ranking_json,
    wilson_hilferty,
)

from conftest import random_dataset

# standard table values, upper 5% and 1% points
TABLE = {(1, 0.05): 3.841, (2, 0.05): 5.991, (5, 0.05): 11.070, (10, 0.05): 18.307,
         (30, 0.05): 43.773, (100, 0.05): 124.342, (1, 0.01): 6.635, (10, 0.01): 23.209}


def test_reference_table():
    stat, df = chi_squared_table([[10, 20], [20, 10]])
    assert stat == pytest.approx(6.667, abs=1e-3)
    assert df == 1


def test_perfect_association_equals_n():
    values = ["a"] * 25 + ["b"] * 25
    labels = [1] * 25 + [0] * 25
    assert chi_squared(values, labels) == (pytest.approx(50.0), 1)


def test_independent_attribute_is_zero():
    values = ["a"] * 4 + ["b"] * 8
    labels = [1, 0, 0, 0] + [1, 1, 0, 0, 0, 0, 0, 0]
    assert chi_squared(values, labels)[0] == 0.0


def test_constant_attribute():
    assert chi_squared(["x"] * 10, [0, 1] * 5) == (0.0, 0)
    ds = random_dataset(200, 40, seed=1)
    codes = ds.codes.copy()
    codes[:, 0] = 3
    ranked = rank_attributes(Dataset(ds.schema, codes, ds.labels), seed=1)
    month = next(a for a in ranked if a.name == "Month")
    assert month.chi2 == 0.0 and month.df == 0 and not month.significant
    assert month.critical == pytest.approx(3.841, abs=1e-3)


@pytest.mark.parametrize("key", sorted(TABLE))
def test_critical_values_match_tables(key):
    df, alpha = key
    assert chi2_critical(df, alpha) == pytest.approx(TABLE[key], abs=5e-3)


def test_critical_required_tolerances():
    assert abs(chi2_critical(1, 0.05) - 3.841) <= 0.02
    assert abs(chi2_critical(10, 0.05) - 18.307) <= 0.1
    # median of chi-squared is about df - 2/3
    assert chi2_critical(200, 0.5) == pytest.approx(200 - 2 / 3, abs=0.05)


def test_wilson_hilferty_start_is_close():
    errs = [abs(wilson_hilferty(df, 0.05) / chi2_critical(df, 0.05) - 1) for df in range(2, 101)]
    assert max(errs) <= 0.01
    assert all(b <= a for a, b in zip(errs, errs[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 200), st.integers(2, 6), st.integers(0, 2**32), st.integers(2, 5))
def test_statistic_invariances(n, cats, seed, k):
    rng = np.random.default_rng(seed)
    values = rng.integers(0, cats, size=n)
    labels = rng.integers(0, 2, size=n)
    stat, df = chi_squared(values, labels)
    assert stat >= 0
    # relabel categories
    perm = rng.permutation(cats)
    assert chi_squared(perm[values], labels)[0] == pytest.approx(stat, rel=1e-12, abs=1e-12)
    # scaling the counts scales the statistic
    _, table = contingency_table(values, labels)
    assert chi_squared_table(k * table)[0] == pytest.approx(k * stat, rel=1e-12, abs=1e-12)
    assert chi_squared(np.tile(values, k), np.tile(labels, k))[0] == pytest.approx(k * stat, rel=1e-12, abs=1e-12)


def test_mean_over_folds():
    ds = generate_synthetic(1000, 0.05, seed=2)
    stats = fold_statistics(ds, 10, seed=3)
    ranked = rank_attributes(ds, 10, seed=3)
    by_name = {a.name: a.chi2 for a in ranked}
    for j, name in enumerate(ds.schema.names):
        assert abs(by_name[name] - sum(stats[:, j]) / 10) <= 1e-12
    # each fold statistic comes from that fold's training rows
    folds = stratified_folds(ds.labels, 10, 3)
    rows = folds != 4
    assert stats[4, 5] == chi_squared(ds.codes[rows, 5], ds.labels[rows])[0]


def test_rank_output_shape_and_ties():
    ds = random_dataset(300, 60, seed=4)
    ranked = rank_attributes(ds, seed=0)
    assert sorted(a.rank for a in ranked) == list(range(1, 10))
    assert [a.chi2 for a in ranked] == sorted((a.chi2 for a in ranked), reverse=True)
    # all-zero statistics fall back to schema order
    flat = Dataset(ds.schema, np.zeros_like(ds.codes), ds.labels)
    assert [a.name for a in rank_attributes(flat)] == list(ds.schema.names)


def crash_type_only():
    return (
        Effect(CRASH_TYPE, "vehicle_pedestrian", 6.0),
        Effect(CRASH_TYPE, "truck_motorcycle", 4.0),
        Effect(CRASH_TYPE, "vehicle_vehicle", 0.5),
    )


def test_planted_crash_type_ranks_first():
    noise = ("Month", "Day", "Day of the Week", "Road Type")
    hits = quiet = total = 0
    for seed in range(20):
        ds = generate_synthetic(2000, 0.05, crash_type_only(), seed=seed)
        ranked = rank_attributes(ds, seed=seed)
        hits += ranked[0].name == CRASH_TYPE and ranked[0].significant
        for a in ranked:
            if a.name in noise:
                total += 1
                quiet += not a.significant
    assert hits >= 18
    assert quiet >= 0.9 * total


def test_alpha_monotone(planted_small):
    loose = {a.name for a in rank_attributes(planted_small, alpha=0.05) if a.significant}
    tight = {a.name for a in rank_attributes(planted_small, alpha=0.01) if a.significant}
    assert tight <= loose


def test_exports(planted_small):
    ranked = rank_attributes(planted_small)
    lines = ranking_csv(ranked).splitlines()
    assert lines[0] == "rank,attribute,chi2,df,critical,significant"
    assert len(lines) == 10
    doc = json.loads(ranking_json(ranked))
    assert [d["name"] for d in doc] == [a.name for a in ranked]
    assert set(doc[0]) == {"rank", "name", "chi2", "df", "critical", "significant"}
