import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashml.dataset import (
    CRASH_TYPE,
    HOUR,
    LRAP_SCHEMA,
    AttributeSpec,
    CrashRecord,
    Dataset,
    Effect,
    GeoPoint,
    Schema,
    allocate,
    generate_synthetic,
    normalize_label,
    one_hot_encode,
    parse_csv,
    stratified_split,
    write_csv,
)
from crashml.errors import DegenerateClassError, DomainError, ParseError, StratificationError

from conftest import random_dataset

HEADER = "Month,Day,Day of the Week,Hour of Crash,AM/PM,Crash Type,Injury Severity Level,Road Type,Spatial Cluster ID,fatality"
ROW = "3,14,Friday,2,AM,Vehicle–Pedestrian,Serious Injury,Motorway,4,Fatal"


def test_schema_width_is_106():
    assert LRAP_SCHEMA.width == 12 + 31 + 7 + 24 + 2 + 11 + 3 + 6 + 10 == 106
    assert len(LRAP_SCHEMA.inputs) == 9


def test_attribute_domain_rules():
    with pytest.raises(ValueError):
        AttributeSpec("x", ())
    with pytest.raises(ValueError):
        AttributeSpec("x", ("a", "A"))
    with pytest.raises(ValueError):
        Schema((AttributeSpec("x", ("a",)), AttributeSpec("x", ("b",))))


def test_labels_normalise():
    assert normalize_label("Vehicle–Pedestrian") == "vehicle_pedestrian"
    assert normalize_label(" No Apparent-Injury ") == "no_apparent_injury"
    assert normalize_label("07") == "7"


def test_parse_single_row():
    ds = parse_csv(HEADER + "\n" + ROW + "\n")
    assert len(ds) == 1
    rec = ds.record(0)
    assert rec.label == "fatal"
    assert rec.values[CRASH_TYPE] == "vehicle_pedestrian"
    assert rec.location is None


def test_parse_hour_out_of_domain_names_attribute_and_line():
    bad = ROW.replace(",2,AM,", ",25,AM,")
    with pytest.raises(DomainError, match="Hour of Crash") as err:
        parse_csv(HEADER + "\n" + ROW + "\n" + bad + "\n")
    assert "line 3" in str(err.value)


def test_parse_wrong_column_count():
    with pytest.raises(ParseError, match="line 2"):
        parse_csv(HEADER + "\n3,14,Friday\n")


def test_parse_missing_column_and_bad_label():
    with pytest.raises(ParseError):
        parse_csv(HEADER.replace(",fatality", "") + "\n")
    with pytest.raises(DomainError, match="line 2"):
        parse_csv(HEADER + "\n" + ROW.replace("Fatal", "maybe") + "\n")


def test_parse_columns_in_any_order_with_location():
    cols = HEADER.split(",")
    vals = ROW.split(",")
    text = ",".join(["lat", "lon"] + cols[::-1]) + "\n" + ",".join(["33.9", "35.5"] + vals[::-1]) + "\n"
    ds = parse_csv(text)
    assert ds.record(0).location == GeoPoint(33.9, 35.5)
    assert ds.record(0).values[HOUR] == "2"


def test_csv_round_trip_8482_rows():
    ds = generate_synthetic(8482, 0.05, seed=5)
    text = write_csv(ds)
    back = parse_csv(io.StringIO(text))
    assert len(back) == 8482
    assert back.content_equals(ds)
    assert write_csv(back) == text


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_csv_round_trip_property(n, seed):
    ds = random_dataset(n, fatal=n // 3, seed=seed)
    assert parse_csv(write_csv(ds)).content_equals(ds)


def test_partial_locations_round_trip():
    ds = generate_synthetic(30, 0.2, seed=1)
    lat = ds.lat.copy()
    lon = ds.lon.copy()
    lat[::3] = np.nan
    lon[::3] = np.nan
    holey = Dataset(ds.schema, ds.codes, ds.labels, lat, lon)
    assert parse_csv(write_csv(holey)).content_equals(holey)


def test_geopoint_and_dataset_reject_bad_values():
    with pytest.raises(DomainError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(DomainError):
        Dataset(LRAP_SCHEMA, [[0] * 8 + [10]], [0])
    with pytest.raises(DomainError):
        Dataset(LRAP_SCHEMA, [[0] * 9], [2])


def test_from_records_matches_codes():
    ds = random_dataset(20, 5, seed=2)
    again = Dataset.from_records(LRAP_SCHEMA, ds.rows)
    assert again.content_equals(ds)
    assert isinstance(ds.record(0), CrashRecord)


def test_minority_label():
    ds = random_dataset(20, 5)
    assert ds.minority_label == "fatal"
    with pytest.raises(DegenerateClassError):
        random_dataset(5, 0).minority_label


def test_one_hot_rows_have_nine_ones():
    ds = random_dataset(50, 10, seed=4)
    fm = one_hot_encode(ds)
    assert fm.X.shape == (50, 106)
    assert np.all(fm.X.sum(axis=1) == 9)
    assert set(np.unique(fm.X)) <= {0.0, 1.0}
    assert np.array_equal(fm.y, np.where(ds.labels == 1, 1, -1))
    # column order: schema order, then domain order
    assert fm.column_index[("Month", "1")] == 0
    assert fm.column_index[("Day", "1")] == 12
    assert fm.column_index[("Spatial Cluster ID", "10")] == 105


def test_one_hot_identical_rows():
    ds = random_dataset(1, 0, seed=9)
    both = Dataset(ds.schema, np.vstack([ds.codes, ds.codes]), [0, 1])
    X = one_hot_encode(both).X
    assert np.array_equal(X[0], X[1])


def test_split_95_5():
    ds = random_dataset(100, 5, seed=0)
    train, test = stratified_split(ds, 0.2, seed=1)
    assert test.class_counts() == {"not_fatal": 19, "fatal": 1}
    assert len(train) == 80


def test_split_8482_rows_size_and_disjointness():
    ds = generate_synthetic(8482, 0.05, seed=0)
    train, test = stratified_split(ds, 0.2, seed=3)
    assert len(test) == 1696  # round-half-up of 1696.4
    assert sorted(np.concatenate([train.ids, test.ids]).tolist()) == list(range(8482))
    again = stratified_split(ds, 0.2, seed=3)
    assert np.array_equal(again[1].ids, test.ids)


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 400), st.floats(0.05, 0.6), st.floats(0.05, 0.5), st.integers(0, 2**63))
def test_split_class_shares_property(n, pos_frac, test_fraction, seed):
    fatal = max(1, min(n - 1, int(n * pos_frac)))
    ds = random_dataset(n, fatal, seed=seed % 1000)
    train, test = stratified_split(ds, test_fraction, seed)
    assert len(set(train.ids) & set(test.ids)) == 0
    assert len(train) + len(test) == n
    for k, total in ((0, n - fatal), (1, fatal)):
        share = (test.labels == k).sum() / total
        assert abs(share - test_fraction) <= 1.0 / total + 1e-12


def test_split_single_class_rejected():
    with pytest.raises(StratificationError):
        stratified_split(random_dataset(10, 0), 0.2)


def test_allocate_largest_remainder():
    assert allocate(20, [95, 5]) == [19, 1]
    assert sum(allocate(7, [3, 3, 3])) == 7


def test_synthetic_counts():
    assert generate_synthetic(8482, 0.05, seed=0).class_counts()["fatal"] == 424
    assert generate_synthetic(20, 0.5).class_counts()["fatal"] == 10
    with pytest.raises(DegenerateClassError):
        generate_synthetic(10, 0.01)


def test_synthetic_is_deterministic():
    a = generate_synthetic(500, 0.05, seed=42)
    b = generate_synthetic(500, 0.05, seed=42)
    assert write_csv(a) == write_csv(b)
    assert write_csv(generate_synthetic(500, 0.05, seed=43)) != write_csv(a)


def test_synthetic_planted_effect_raises_rate():
    plan = (Effect(CRASH_TYPE, "Vehicle–Pedestrian", 8.0),)
    ds = generate_synthetic(5000, 0.05, plan, seed=1)
    ped = ds.column(CRASH_TYPE) == LRAP_SCHEMA.attribute(CRASH_TYPE).code("vehicle_pedestrian")
    assert ds.labels[ped].mean() > ds.labels.mean()


def test_synthetic_dates_are_consistent():
    import datetime as dt

    ds = generate_synthetic(300, 0.1, seed=8)
    for i in range(len(ds)):
        m, d, w = (int(ds.codes[i, j]) for j in range(3))
        # some year in 2015-2018 must contain this month/day on this weekday
        assert any(
            dt.date(y, m + 1, d + 1).weekday() == w
            for y in range(2015, 2019)
            if d + 1 <= [31, 29 if y % 4 == 0 else 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31][m]
        )
        assert ds.codes[i, 4] == int(ds.codes[i, 3] >= 12)
