"""Crash-record schema, CSV ingestion, encoding, splitting and synthesis.

A :class:`Dataset` stores the nine categorical inputs as an ``(n, 9)`` array
of category codes (positions in each attribute's domain) plus a label
vector where ``1`` is fatal.  Record objects are materialised on demand;
everything downstream works on the code arrays.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import math
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import DegenerateClassError, DomainError, ParseError, StratificationError
from .seeding import substream

FATAL = "fatal"
NOT_FATAL = "not_fatal"
LABEL_COLUMN = "fatality"
LAT_COLUMN = "lat"
LON_COLUMN = "lon"

# class index used in every probability vector: (p_not_fatal, p_fatal)
CLASS_LABELS = (NOT_FATAL, FATAL)

_SEP = re.compile(r"[^0-9a-z]+")


def normalize_label(value: str) -> str:
    """Lower-snake-case a category label; digit strings lose leading zeros."""
    text = unicodedata.normalize("NFKC", str(value)).strip().lower()
    text = _SEP.sub("_", text).strip("_")
    if text.isdigit():
        return str(int(text))
    return text


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    domain: tuple[str, ...]
    kind: str = "categorical"

    def __post_init__(self):
        domain = tuple(normalize_label(v) for v in self.domain)
        if not domain:
            raise ValueError(f"attribute {self.name!r} has an empty domain")
        if len(set(domain)) != len(domain):
            raise ValueError(f"attribute {self.name!r} has duplicate labels")
        object.__setattr__(self, "domain", domain)

    @property
    def size(self) -> int:
        return len(self.domain)

    def code(self, label: str) -> int:
        try:
            return self._index[normalize_label(label)]
        except KeyError:
            raise DomainError(f"value {label!r} is not in the domain of {self.name!r}") from None

    @property
    def _index(self) -> dict[str, int]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {v: i for i, v in enumerate(self.domain)}
            object.__setattr__(self, "_idx", idx)
        return idx


@dataclass(frozen=True)
class Schema:
    inputs: tuple[AttributeSpec, ...]
    output: AttributeSpec = AttributeSpec(LABEL_COLUMN, CLASS_LABELS)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        names = [a.name for a in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        if len(set(normalize_label(n) for n in names)) != len(names):
            raise ValueError("attribute names must stay unique after normalisation")
        if self.output.size != 2:
            raise ValueError("the output attribute must have exactly two labels")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.inputs)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.inputs)

    @property
    def width(self) -> int:
        return sum(self.sizes)

    def index(self, name: str) -> int:
        key = normalize_label(name)
        for i, attr in enumerate(self.inputs):
            if normalize_label(attr.name) == key:
                return i
        raise KeyError(name)

    def attribute(self, name: str) -> AttributeSpec:
        return self.inputs[self.index(name)]

    def to_dict(self) -> dict:
        return {"inputs": [{"name": a.name, "domain": list(a.domain)} for a in self.inputs]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Schema":
        return cls(tuple(AttributeSpec(a["name"], tuple(a["domain"])) for a in data["inputs"]))


def _numbers(lo: int, hi: int) -> tuple[str, ...]:
    return tuple(str(i) for i in range(lo, hi + 1))


MONTH = "Month"
DAY = "Day"
DAY_OF_WEEK = "Day of the Week"
HOUR = "Hour of Crash"
AM_PM = "AM/PM"
CRASH_TYPE = "Crash Type"
INJURY_SEVERITY = "Injury Severity Level"
ROAD_TYPE = "Road Type"
SPATIAL_CLUSTER = "Spatial Cluster ID"

WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
CRASH_TYPES = (
    "Vehicle-Vehicle", "Vehicle-Truck", "Vehicle-Pedestrian", "Vehicle-Motorcycle",
    "Vehicle-Barrier", "Truck-Truck", "Truck-Motorcycle", "Truck-Barrier",
    "Motorcycle-Motorcycle", "Motorcycle-Barrier", "Other",
)
SEVERITIES = ("No Apparent-Injury", "Minor Injury", "Serious Injury")
ROAD_TYPES = ("Motorway", "Trunk", "Primary", "Secondary", "Tertiary", "Unclassified")

LRAP_SCHEMA = Schema((
    AttributeSpec(MONTH, _numbers(1, 12)),
    AttributeSpec(DAY, _numbers(1, 31)),
    AttributeSpec(DAY_OF_WEEK, WEEKDAYS),
    AttributeSpec(HOUR, _numbers(0, 23)),
    AttributeSpec(AM_PM, ("am", "pm")),
    AttributeSpec(CRASH_TYPE, CRASH_TYPES),
    AttributeSpec(INJURY_SEVERITY, SEVERITIES),
    AttributeSpec(ROAD_TYPE, ROAD_TYPES),
    AttributeSpec(SPATIAL_CLUSTER, _numbers(1, 10)),
))


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0) or not (-180.0 <= self.longitude <= 180.0):
            raise DomainError(f"coordinates out of range: ({self.latitude}, {self.longitude})")


@dataclass(frozen=True)
class CrashRecord:
    values: Mapping[str, str]
    label: str
    location: GeoPoint | None = None

    @property
    def is_fatal(self) -> bool:
        return self.label == FATAL


class Dataset:
    """Immutable table of crash records backed by category-code arrays.

    ``ids`` tracks provenance: rows parsed or generated get their original
    position, synthetic rows produced by resampling carry ``-1``.
    """

    def __init__(self, schema: Schema, codes, labels, lat=None, lon=None, ids=None):
        codes = np.array(codes, dtype=np.int16).reshape(-1, len(schema.inputs))
        labels = np.array(labels, dtype=np.int8).reshape(-1)
        n = codes.shape[0]
        if labels.shape[0] != n:
            raise ValueError("codes and labels disagree on the number of rows")
        if n:
            sizes = np.array(schema.sizes)
            if (codes < 0).any() or (codes >= sizes).any():
                bad = np.argwhere((codes < 0) | (codes >= sizes))[0]
                raise DomainError(
                    f"row {bad[0]}: code {codes[bad[0], bad[1]]} outside the domain of "
                    f"{schema.inputs[bad[1]].name!r}"
                )
            if not np.isin(labels, (0, 1)).all():
                raise DomainError("labels must be 0 (not fatal) or 1 (fatal)")
        lat = np.full(n, np.nan) if lat is None else np.array(lat, dtype=np.float64).reshape(-1)
        lon = np.full(n, np.nan) if lon is None else np.array(lon, dtype=np.float64).reshape(-1)
        if np.isnan(lat).tolist() != np.isnan(lon).tolist():
            raise DomainError("latitude and longitude must be present or absent together")
        ok = ~np.isnan(lat)
        if (np.abs(lat[ok]) > 90).any() or (np.abs(lon[ok]) > 180).any():
            raise DomainError("coordinates out of geographic range")
        ids = np.arange(n, dtype=np.int64) if ids is None else np.array(ids, dtype=np.int64).reshape(-1)
        for arr in (codes, labels, lat, lon, ids):
            arr.setflags(write=False)
        self.schema = schema
        self.codes = codes
        self.labels = labels
        self.lat = lat
        self.lon = lon
        self.ids = ids

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __repr__(self) -> str:
        c = self.class_counts()
        return f"Dataset(n={len(self)}, fatal={c[FATAL]}, not_fatal={c[NOT_FATAL]})"

    @classmethod
    def from_records(cls, schema: Schema, records: Iterable[CrashRecord]) -> "Dataset":
        codes, labels, lat, lon = [], [], [], []
        for rec in records:
            codes.append([a.code(rec.values[a.name]) for a in schema.inputs])
            labels.append(label_code(rec.label))
            lat.append(rec.location.latitude if rec.location else np.nan)
            lon.append(rec.location.longitude if rec.location else np.nan)
        return cls(schema, np.array(codes, dtype=np.int16).reshape(-1, len(schema.inputs)), labels, lat, lon)

    def record(self, i: int) -> CrashRecord:
        values = {a.name: a.domain[c] for a, c in zip(self.schema.inputs, self.codes[i])}
        loc = None
        if not np.isnan(self.lat[i]):
            loc = GeoPoint(float(self.lat[i]), float(self.lon[i]))
        return CrashRecord(values, CLASS_LABELS[self.labels[i]], loc)

    @property
    def rows(self) -> list[CrashRecord]:
        return [self.record(i) for i in range(len(self))]

    def class_counts(self) -> dict[str, int]:
        fatal = int(self.labels.sum())
        return {NOT_FATAL: len(self) - fatal, FATAL: fatal}

    @property
    def minority_label(self) -> str:
        c = self.class_counts()
        if min(c.values()) == 0:
            raise DegenerateClassError("minority class is undefined with a single class present")
        # a tie keeps fatal as the positive/minority class
        return NOT_FATAL if c[NOT_FATAL] < c[FATAL] else FATAL

    @property
    def has_location(self) -> np.ndarray:
        return ~np.isnan(self.lat)

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.schema.index(name)]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.schema, self.codes[idx], self.labels[idx], self.lat[idx], self.lon[idx], self.ids[idx])

    def with_column(self, name: str, codes) -> "Dataset":
        new = self.codes.copy()
        new[:, self.schema.index(name)] = codes
        return Dataset(self.schema, new, self.labels, self.lat, self.lon, self.ids)

    def content_equals(self, other: "Dataset") -> bool:
        """Equality of schema and row content; provenance ids are ignored."""
        return (
            self.schema == other.schema
            and np.array_equal(self.codes, other.codes)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.lat, other.lat, equal_nan=True)
            and np.array_equal(self.lon, other.lon, equal_nan=True)
        )


def concat(parts: Sequence[Dataset]) -> Dataset:
    schema = parts[0].schema
    if any(p.schema != schema for p in parts):
        raise ValueError("cannot concatenate datasets with different schemas")
    return Dataset(
        schema,
        np.concatenate([p.codes for p in parts]),
        np.concatenate([p.labels for p in parts]),
        np.concatenate([p.lat for p in parts]),
        np.concatenate([p.lon for p in parts]),
        np.concatenate([p.ids for p in parts]),
    )


def label_code(value: str) -> int:
    key = normalize_label(value)
    if key == FATAL:
        return 1
    if key == NOT_FATAL:
        return 0
    raise DomainError(f"fatality label must be 'fatal' or 'not_fatal', got {value!r}")


# --------------------------------------------------------------------------
# CSV


def parse_csv(text: str | TextIO, schema: Schema = LRAP_SCHEMA) -> Dataset:
    """Read crash records in the external CSV format.

    Columns are matched by normalised name, so their order is free.  Raises
    :class:`ParseError` for structural problems and :class:`DomainError` for
    values outside an attribute's domain, both citing the 1-based line.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("line 1: missing header row") from None
    keys = [normalize_label(h) for h in header]
    if len(set(keys)) != len(keys):
        raise ParseError("line 1: duplicate column names")
    pos = {k: i for i, k in enumerate(keys)}
    cols = []
    for attr in schema.inputs:
        key = normalize_label(attr.name)
        if key not in pos:
            raise ParseError(f"line 1: missing column {attr.name!r}")
        cols.append(pos[key])
    if LABEL_COLUMN not in pos:
        raise ParseError(f"line 1: missing column {LABEL_COLUMN!r}")
    ycol = pos[LABEL_COLUMN]
    has_loc = LAT_COLUMN in pos or LON_COLUMN in pos
    if has_loc and not (LAT_COLUMN in pos and LON_COLUMN in pos):
        raise ParseError("line 1: 'lat' and 'lon' columns must appear together")
    known = set(cols) | {ycol} | ({pos[LAT_COLUMN], pos[LON_COLUMN]} if has_loc else set())
    if len(known) != len(header):
        extra = [header[i] for i in range(len(header)) if i not in known]
        raise ParseError(f"line 1: unexpected columns {extra}")

    codes, labels, lat, lon = [], [], [], []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"line {line}: expected {len(header)} columns, found {len(row)}")
        rec = []
        for attr, c in zip(schema.inputs, cols):
            value = normalize_label(row[c])
            code = attr._index.get(value)
            if code is None:
                raise DomainError(f"line {line}: value {row[c]!r} is not valid for {attr.name!r}")
            rec.append(code)
        codes.append(rec)
        try:
            labels.append(label_code(row[ycol]))
        except DomainError as exc:
            raise DomainError(f"line {line}: {exc}") from None
        if has_loc:
            la, lo = row[pos[LAT_COLUMN]].strip(), row[pos[LON_COLUMN]].strip()
            if (la == "") != (lo == ""):
                raise ParseError(f"line {line}: lat and lon must both be present or both empty")
            if la == "":
                lat.append(np.nan)
                lon.append(np.nan)
            else:
                try:
                    fla, flo = float(la), float(lo)
                except ValueError:
                    raise ParseError(f"line {line}: unreadable coordinates {la!r}, {lo!r}") from None
                if not (-90 <= fla <= 90 and -180 <= flo <= 180):
                    raise DomainError(f"line {line}: coordinates ({fla}, {flo}) out of range")
                lat.append(fla)
                lon.append(flo)
        else:
            lat.append(np.nan)
            lon.append(np.nan)
    n = len(labels)
    return Dataset(schema, np.array(codes, dtype=np.int16).reshape(n, len(schema.inputs)), labels, lat, lon)


def write_csv(dataset: Dataset, stream: TextIO | None = None) -> str | None:
    """Write ``dataset`` in the external CSV format.

    Returns the text when ``stream`` is None.  ``lat``/``lon`` columns are
    emitted only if at least one row has a location.
    """
    out = io.StringIO() if stream is None else stream
    writer = csv.writer(out, lineterminator="\n")
    schema = dataset.schema
    with_loc = bool(dataset.has_location.any())
    header = list(schema.names) + [LABEL_COLUMN]
    if with_loc:
        header += [LAT_COLUMN, LON_COLUMN]
    writer.writerow(header)
    domains = [a.domain for a in schema.inputs]
    for i in range(len(dataset)):
        row = [d[c] for d, c in zip(domains, dataset.codes[i])]
        row.append(CLASS_LABELS[dataset.labels[i]])
        if with_loc:
            if np.isnan(dataset.lat[i]):
                row += ["", ""]
            else:
                row += [repr(float(dataset.lat[i])), repr(float(dataset.lon[i]))]
        writer.writerow(row)
    if stream is None:
        return out.getvalue()
    return None


def read_csv(path, schema: Schema = LRAP_SCHEMA) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csv(fh, schema)


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_csv(dataset, fh)


# --------------------------------------------------------------------------
# encoding


@dataclass
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    column_index: dict[tuple[str, str], int] = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape


def column_offsets(schema: Schema) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(schema.sizes)[:-1]]).astype(np.int64)


def encode_codes(schema: Schema, codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes).reshape(-1, len(schema.inputs))
    X = np.zeros((codes.shape[0], schema.width))
    rows = np.arange(codes.shape[0])[:, None]
    X[rows, column_offsets(schema) + codes] = 1.0
    return X


def one_hot_encode(dataset: Dataset) -> FeatureMatrix:
    schema = dataset.schema
    index = {}
    col = 0
    for attr in schema.inputs:
        for cat in attr.domain:
            index[(attr.name, cat)] = col
            col += 1
    y = np.where(dataset.labels == 1, 1, -1).astype(np.int8)
    return FeatureMatrix(encode_codes(schema, dataset.codes), y, index)


# --------------------------------------------------------------------------
# splitting


def allocate(total: int, counts: Sequence[int]) -> list[int]:
    """Largest-remainder apportionment of ``total`` over ``counts``.

    Remainder ties go to the lower class index.
    """
    n = sum(counts)
    exact = [total * c / n for c in counts]
    alloc = [min(int(math.floor(q)), c) for q, c in zip(exact, counts)]
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - math.floor(exact[i])), i))
    short = total - sum(alloc)
    for i in order * 2:
        if short <= 0:
            break
        if alloc[i] < counts[i]:
            alloc[i] += 1
            short -= 1
    return alloc


def stratified_split(dataset: Dataset, test_fraction: float = 0.2, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = len(dataset)
    counts = dataset.class_counts()
    if min(counts.values()) == 0:
        raise StratificationError("cannot stratify a single-class dataset")
    n_test = round_half_up(test_fraction * n)
    if n_test < 1 or n_test >= n:
        raise StratificationError(f"test_fraction {test_fraction} leaves an empty partition for n={n}")
    per_class = [np.flatnonzero(dataset.labels == k) for k in (0, 1)]
    quotas = allocate(n_test, [len(ix) for ix in per_class])
    test_idx = []
    for k, (ix, q) in enumerate(zip(per_class, quotas)):
        perm = substream(seed, "split", k).permutation(len(ix))
        test_idx.append(ix[perm[:q]])
    test_mask = np.zeros(n, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    return dataset.subset(np.flatnonzero(~test_mask)), dataset.subset(np.flatnonzero(test_mask))


# --------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class Effect:
    """Multiply the fatality odds of rows whose ``attribute`` equals ``category``."""

    attribute: str
    category: str
    odds: float


DependencyPlan = tuple[Effect, ...]

# Blob centres roughly at Lebanese population centres, heaviest first.
SPATIAL_CENTRES = (
    (33.8938, 35.5018), (34.4367, 35.8497), (33.5571, 35.3729), (33.2705, 35.2038),
    (33.8463, 35.9020), (34.0047, 36.2110), (33.9808, 35.6178), (33.3772, 35.4836),
    (34.1230, 35.6519), (34.5428, 36.0797),
)
SPATIAL_WEIGHTS = (0.24, 0.13, 0.1, 0.08, 0.08, 0.07, 0.1, 0.06, 0.08, 0.06)
SPATIAL_SPREAD = 0.025

CRASH_TYPE_WEIGHTS = (0.34, 0.08, 0.12, 0.12, 0.08, 0.03, 0.03, 0.03, 0.04, 0.05, 0.08)
SEVERITY_WEIGHTS = (0.45, 0.38, 0.17)
ROAD_WEIGHTS = (0.1, 0.12, 0.25, 0.23, 0.18, 0.12)
HOUR_WEIGHTS = (
    2, 1.6, 1.4, 1.3, 1.2, 1.4, 2.2, 3.5, 4.8, 4.6, 4.5, 4.6,
    4.8, 5, 5.1, 5.2, 5.4, 5.6, 5.5, 5, 4.2, 3.6, 3, 2.5,
)


def planted_plan() -> DependencyPlan:
    """Effects on crash type, injury severity, spatial cluster and hour.

    Road type and day of week carry weaker effects; month and day of month
    stay pure noise.
    """
    return (
        Effect(CRASH_TYPE, "vehicle_pedestrian", 6.0),
        Effect(CRASH_TYPE, "truck_motorcycle", 4.0),
        Effect(CRASH_TYPE, "motorcycle_barrier", 2.5),
        Effect(CRASH_TYPE, "vehicle_vehicle", 0.5),
        Effect(INJURY_SEVERITY, "serious_injury", 6.0),
        Effect(INJURY_SEVERITY, "no_apparent_injury", 0.4),
        Effect(SPATIAL_CLUSTER, "3", 3.0),
        Effect(SPATIAL_CLUSTER, "6", 2.5),
        Effect(SPATIAL_CLUSTER, "1", 0.6),
        Effect(HOUR, "2", 3.0),
        Effect(HOUR, "3", 4.0),
        Effect(HOUR, "4", 3.0),
        Effect(HOUR, "5", 2.0),
        Effect(ROAD_TYPE, "motorway", 1.6),
        Effect(DAY_OF_WEEK, "friday", 1.3),
        Effect(DAY_OF_WEEK, "sunday", 1.3),
    )


def _normalised(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    return w / w.sum()


def generate_synthetic(
    n: int,
    fatality_rate: float = 0.05,
    plan: DependencyPlan = (),
    seed: int = 0,
    n_blobs: int = 10,
    schema: Schema = LRAP_SCHEMA,
) -> Dataset:
    """Deterministic LRAP-shaped data with an exact fatal count.

    Dates are drawn uniformly over 2015-2018 so month, day and weekday are
    mutually consistent; AM/PM follows the hour.  Coordinates come from
    ``n_blobs`` Gaussian blobs and the blob number is the spatial cluster ID.
    Exactly ``round(fatality_rate * n)`` rows are labelled fatal, chosen by
    weighted sampling without replacement where each row's weight is the
    product of the odds multipliers in ``plan`` that match it.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 < fatality_rate < 1.0:
        raise ValueError("fatality_rate must lie in (0, 1)")
    n_fatal = round_half_up(fatality_rate * n)
    if n_fatal < 1 or n_fatal > n - 1:
        raise DegenerateClassError(f"fatality_rate {fatality_rate} with n={n} leaves a class empty")
    if not 1 <= n_blobs <= len(SPATIAL_CENTRES):
        raise ValueError(f"n_blobs must be in 1..{len(SPATIAL_CENTRES)}")
    if schema.names != LRAP_SCHEMA.names:
        raise ValueError("synthesis is defined for the LRAP schema only")

    rng = substream(seed, "synth")
    start = _dt.date(2015, 1, 1).toordinal()
    days = rng.integers(0, 1461, size=n)
    dates = [_dt.date.fromordinal(start + int(d)) for d in days]
    month = np.array([d.month - 1 for d in dates])
    day = np.array([d.day - 1 for d in dates])
    weekday = np.array([d.weekday() for d in dates])
    hour = rng.choice(24, size=n, p=_normalised(HOUR_WEIGHTS))
    ampm = (hour >= 12).astype(int)
    crash = rng.choice(len(CRASH_TYPES), size=n, p=_normalised(CRASH_TYPE_WEIGHTS))
    severity = rng.choice(3, size=n, p=_normalised(SEVERITY_WEIGHTS))
    road = rng.choice(len(ROAD_TYPES), size=n, p=_normalised(ROAD_WEIGHTS))
    blob = rng.choice(n_blobs, size=n, p=_normalised(SPATIAL_WEIGHTS[:n_blobs]))
    centres = np.array(SPATIAL_CENTRES[:n_blobs])
    jitter = rng.normal(0.0, SPATIAL_SPREAD, size=(n, 2))
    lat = np.round(centres[blob, 0] + jitter[:, 0], 6)
    lon = np.round(centres[blob, 1] + jitter[:, 1], 6)
    codes = np.stack([month, day, weekday, hour, ampm, crash, severity, road, blob], axis=1)

    weight = np.ones(n)
    for eff in plan:
        col = schema.index(eff.attribute)
        code = schema.inputs[col].code(eff.category)
        weight[codes[:, col] == code] *= eff.odds
    # Efraimidis-Spirakis keys: the n_fatal largest log(u)/w form a weighted sample
    keys = np.log(rng.random(n)) / weight
    order = np.argsort(-keys, kind="stable")
    labels = np.zeros(n, dtype=np.int8)
    labels[order[:n_fatal]] = 1
    return Dataset(schema, codes, labels, lat, lon)
