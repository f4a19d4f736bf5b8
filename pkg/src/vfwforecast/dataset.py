"""Tabular PV time series: ingestion, cleaning, lag features, splits and a
synthetic plant generator.

Timestamps are stored as int64 POSIX seconds (UTC) together with a single
fixed UTC offset used for local clock arithmetic. The CSV layout is::

    timestamp,air_temp,rel_humidity,wind_speed,wind_dir,ghi,dhi,pv_power

with ISO 8601 timestamps carrying an explicit offset, e.g.
``2019-08-01T10:05:00+09:30``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import (
    ConfigError,
    EmptyAfterClean,
    InsufficientHistory,
    MissingColumn,
    NonMonotonicTimestamps,
    ParseError,
    TooFewRows,
)
from .rng import stream

CSV_COLUMNS = ("timestamp", "air_temp", "rel_humidity", "wind_speed",
               "wind_dir", "ghi", "dhi", "pv_power")
TARGET = "pv_power"
WEATHER_FEATURES = CSV_COLUMNS[1:-1]

DAY_S = 86_400
YEAR_S = 365 * DAY_S

# (low, high) inclusive physical bounds; None = unbounded on that side.
PHYSICAL_RANGES = {
    "ghi": (0.0, None),
    "dhi": (0.0, None),
    "pv_power": (0.0, None),
    "rel_humidity": (0.0, 100.0),
    "wind_dir": (0.0, 360.0),
    "wind_speed": (0.0, None),
}


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix + target indexed by timestamps.

    Rows may have gaps (after cleaning) but every gap is a whole number of
    cadence steps.
    """

    timestamps: np.ndarray
    feature_names: tuple
    features: np.ndarray
    target: np.ndarray
    cadence_s: int = 300
    utc_offset_s: int = 0
    target_name: str = TARGET

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        X = _frozen(self.features, np.float64)
        y = _frozen(self.target, np.float64)
        names = tuple(str(n) for n in self.feature_names)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if not (len(ts) == X.shape[0] == len(y)):
            raise ValueError("timestamps, features and target lengths differ")
        if X.shape[1] != len(names):
            raise ValueError("feature_names does not match the column count")
        if len(set(names)) != len(names):
            raise ValueError("feature_names must be unique")
        if self.cadence_s <= 0:
            raise ValueError("cadence_s must be positive")
        if len(ts) > 1:
            d = np.diff(ts)
            if np.any(d <= 0):
                raise NonMonotonicTimestamps("timestamps must be strictly increasing")
            if np.any(d % self.cadence_s):
                raise NonMonotonicTimestamps("timestamp gaps must be whole cadence steps")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", names)

    def __len__(self):
        return len(self.target)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_arrays(cls, X, y, feature_names=None, cadence_s=300, start=0):
        """Wrap plain arrays, inventing a regular time index."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if feature_names is None:
            feature_names = [f"x{j}" for j in range(X.shape[1])]
        ts = start + cadence_s * np.arange(X.shape[0], dtype=np.int64)
        return cls(ts, tuple(feature_names), X, y, cadence_s=cadence_s)

    def column(self, name: str) -> np.ndarray:
        if name == self.target_name:
            return self.target
        try:
            return self.features[:, self.feature_names.index(name)]
        except ValueError:
            raise MissingColumn(name) from None

    def take(self, rows) -> "Dataset":
        """Row subset; ``rows`` must keep chronological order."""
        rows = np.asarray(rows)
        return Dataset(self.timestamps[rows], self.feature_names,
                       self.features[rows], self.target[rows],
                       self.cadence_s, self.utc_offset_s, self.target_name)

    def drop_feature(self, index: int) -> "Dataset":
        keep = [j for j in range(self.n_features) if j != index]
        return self.select_features(keep)

    def select_features(self, indices: Sequence[int]) -> "Dataset":
        indices = list(indices)
        return Dataset(self.timestamps, [self.feature_names[j] for j in indices],
                       self.features[:, indices], self.target,
                       self.cadence_s, self.utc_offset_s, self.target_name)

    def with_features(self, names, columns) -> "Dataset":
        """Append columns (n, k) named ``names``."""
        columns = np.asarray(columns, dtype=np.float64).reshape(len(self), -1)
        return Dataset(self.timestamps, self.feature_names + tuple(names),
                       np.hstack([self.features, columns]), self.target,
                       self.cadence_s, self.utc_offset_s, self.target_name)

    def local_seconds_of_day(self) -> np.ndarray:
        return (self.timestamps + self.utc_offset_s) % DAY_S


# ---------------------------------------------------------------- CSV I/O

def parse_timestamp(text: str) -> tuple[int, int]:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError("timestamp lacks a UTC offset")
    return int(dt.timestamp()), int(dt.utcoffset().total_seconds())


def format_timestamp(ts: int, offset_s: int) -> str:
    tz = timezone(timedelta(seconds=offset_s))
    return datetime.fromtimestamp(int(ts), tz).isoformat()


def _parse_float(text: str) -> float:
    text = text.strip()
    if text == "" or text.lower() in ("na", "nan", "null"):
        return math.nan
    return float(text)


def load_csv(path, schema: Sequence[str] = CSV_COLUMNS, target: str = TARGET,
             cadence_s: int | None = None) -> Dataset:
    """Read a CSV whose header contains every column of ``schema``.

    Empty cells and ``nan`` become NaN (removed later by :func:`clean`);
    anything else that is not a number raises :class:`ParseError` with the
    1-based data-row number (the header is not counted). The cadence is
    taken as the GCD of timestamp gaps unless given.
    """
    schema = list(schema)
    if "timestamp" not in schema:
        schema = ["timestamp"] + schema
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(schema[0]) from None
        for name in schema:
            if name not in header:
                raise MissingColumn(name)
        pos = {name: header.index(name) for name in schema}
        value_cols = [c for c in schema if c != "timestamp"]
        ts, offsets, rows = [], [], []
        for i, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                t, off = parse_timestamp(rec[pos["timestamp"]])
            except (ValueError, IndexError):
                raise ParseError(i, "timestamp", rec[pos["timestamp"]] if len(rec) > pos["timestamp"] else None) from None
            vals = []
            for c in value_cols:
                try:
                    vals.append(_parse_float(rec[pos[c]]))
                except (ValueError, IndexError):
                    raise ParseError(i, c, rec[pos[c]] if len(rec) > pos[c] else None) from None
            ts.append(t)
            offsets.append(off)
            rows.append(vals)
    if target not in value_cols:
        raise MissingColumn(target)
    ts = np.asarray(ts, dtype=np.int64)
    if len(ts) > 1 and np.any(np.diff(ts) <= 0):
        raise NonMonotonicTimestamps(f"{path}: timestamps are not strictly increasing")
    if cadence_s is None:
        cadence_s = int(np.gcd.reduce(np.diff(ts))) if len(ts) > 1 else 300
    data = np.asarray(rows, dtype=np.float64).reshape(len(ts), len(value_cols))
    t_idx = value_cols.index(target)
    feat_idx = [j for j in range(len(value_cols)) if j != t_idx]
    return Dataset(ts, [value_cols[j] for j in feat_idx], data[:, feat_idx],
                   data[:, t_idx], cadence_s=cadence_s,
                   utc_offset_s=offsets[0] if offsets else 0, target_name=target)


def save_csv(d: Dataset, path) -> None:
    """Write ``d`` with the timestamp first and the target last.

    Floats are written with ``repr`` so ``load_csv(save_csv(d))`` is exact.
    """
    header = ["timestamp", *d.feature_names, d.target_name]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row, y in zip(d.timestamps, d.features, d.target):
            w.writerow([format_timestamp(t, d.utc_offset_s),
                        *(repr(float(v)) for v in row), repr(float(y))])


# ---------------------------------------------------------------- cleaning

def valid_rows(d: Dataset) -> np.ndarray:
    ok = np.all(np.isfinite(d.features), axis=1) & np.isfinite(d.target)
    for name, (lo, hi) in PHYSICAL_RANGES.items():
        try:
            col = d.column(name)
        except MissingColumn:
            continue
        with np.errstate(invalid="ignore"):
            if lo is not None:
                ok &= col >= lo
            if hi is not None:
                ok &= col <= hi
    return ok


def clean(raw: Dataset) -> tuple[Dataset, int]:
    """Delete rows with missing or physically impossible values.

    Returns the cleaned dataset and the number of rows removed.
    """
    ok = valid_rows(raw)
    if not ok.any():
        raise EmptyAfterClean("no rows survive cleaning")
    removed = int((~ok).sum())
    if removed == 0:
        return raw, 0
    return raw.take(np.flatnonzero(ok)), removed


# ---------------------------------------------------------------- features

def add_lag_features(d: Dataset, prev_year: bool = True,
                     hour_indicator: bool = True) -> Dataset:
    """Append ``pv_prev_year`` (target 365 days earlier) and/or ``hour``.

    Rows whose previous-year instant is absent are dropped.
    """
    names, cols = [], []
    keep = np.arange(len(d))
    if prev_year:
        if len(d) == 0 or d.timestamps[-1] - d.timestamps[0] < YEAR_S + d.cadence_s:
            raise InsufficientHistory("prev_year lag needs more than one year of data")
        want = d.timestamps - YEAR_S
        pos = np.searchsorted(d.timestamps, want)
        pos_c = np.minimum(pos, len(d) - 1)
        found = d.timestamps[pos_c] == want
        keep = np.flatnonzero(found)
        names.append("pv_prev_year")
        cols.append(d.target[pos_c[keep]])
    if hour_indicator:
        names.append("hour")
        cols.append((d.local_seconds_of_day()[keep] // 3600).astype(np.float64))
    for n in names:
        if n in d.feature_names:
            raise ValueError(f"column {n!r} already present")
    if not names:
        return d
    base = d.take(keep) if len(keep) != len(d) else d
    return base.with_features(names, np.column_stack(cols))


def add_noise_feature(d: Dataset, name: str = "noise", seed: int = 0) -> Dataset:
    """Append an i.i.d. standard-normal column unrelated to the target."""
    z = stream(seed, "noise_feature", name).standard_normal(len(d))
    return d.with_features([name], z[:, None])


# ---------------------------------------------------------------- splits

@dataclass(frozen=True)
class SplitSpec:
    """How to cut a dataset into train and test.

    ``chronological`` and ``random`` use ``train_fraction``; ``holdout`` tests
    on ``[holdout_start, holdout_end)`` (POSIX seconds or ISO strings) and
    trains on every row strictly before ``holdout_start``.
    """

    train_fraction: float = 0.8
    mode: str = "chronological"
    seed: int = 0
    holdout_start: object = None
    holdout_end: object = None

    def __post_init__(self):
        if self.mode not in ("chronological", "random", "holdout"):
            raise ConfigError("split.mode", f"unknown mode {self.mode!r}")
        if self.mode != "holdout" and not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("split.train_fraction", "must lie in (0, 1)")
        if self.mode == "holdout" and (self.holdout_start is None or self.holdout_end is None):
            raise ConfigError("split.holdout_start", "holdout mode needs start and end")


def _as_posix(v) -> int:
    if isinstance(v, str):
        return parse_timestamp(v)[0]
    return int(v)


def split(d: Dataset, s: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset]:
    n = len(d)
    if n < 2:
        raise TooFewRows("split needs at least 2 rows")
    if s.mode == "holdout":
        lo, hi = _as_posix(s.holdout_start), _as_posix(s.holdout_end)
        test_rows = np.flatnonzero((d.timestamps >= lo) & (d.timestamps < hi))
        train_rows = np.flatnonzero(d.timestamps < lo)
        if len(test_rows) == 0 or len(train_rows) == 0:
            raise TooFewRows("holdout window leaves an empty train or test set")
        return d.take(train_rows), d.take(test_rows)
    n_train = int(math.floor(s.train_fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    if s.mode == "chronological":
        return d.take(np.arange(n_train)), d.take(np.arange(n_train, n))
    perm = stream(s.seed, "split").permutation(n)
    return d.take(np.sort(perm[:n_train])), d.take(np.sort(perm[n_train:]))


# ---------------------------------------------------------------- synthesis

@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 730
    cadence_s: int = 300
    peak_power_w: float = 5000.0
    cloud_noise_sd: float = 0.25
    seasonal_amplitude: float = 0.2
    seed: int = 0
    start: str = "2017-01-01T00:00:00+09:30"
    # e-folding time of cloud cover, seconds
    cloud_timescale_s: float = 3 * 3600.0

    def __post_init__(self):
        if int(self.n_days) != self.n_days or self.n_days < 2:
            raise ConfigError("n_days", "must be an integer >= 2")
        if int(self.cadence_s) != self.cadence_s or self.cadence_s <= 0 or DAY_S % self.cadence_s:
            raise ConfigError("cadence_s", "must be a positive divisor of 86400")
        if not self.peak_power_w > 0:
            raise ConfigError("peak_power_w", "must be > 0")
        if not self.cloud_noise_sd >= 0:
            raise ConfigError("cloud_noise_sd", "must be >= 0")
        if not 0.0 <= self.seasonal_amplitude <= 1.0:
            raise ConfigError("seasonal_amplitude", "must lie in [0, 1]")
        if not self.cloud_timescale_s > 0:
            raise ConfigError("cloud_timescale_s", "must be > 0")
        try:
            parse_timestamp(self.start)
        except ValueError:
            raise ConfigError("start", "must be ISO 8601 with a UTC offset") from None

    @property
    def steps_per_day(self) -> int:
        return DAY_S // self.cadence_s


def clear_sky(hour):
    """Normalised clear-sky profile, zero outside 06:00-18:00."""
    s = np.sin(np.pi * (np.asarray(hour, dtype=np.float64) - 6.0) / 12.0)
    return np.where(s > 1e-12, s, 0.0)


def seasonal_factor(day, amplitude):
    return 1.0 + amplitude * np.sin(2.0 * np.pi * np.asarray(day, dtype=np.float64) / 365.0)


def synth_generate(c: SynthConfig = SynthConfig()) -> Dataset:
    """Deterministic synthetic plant in the CSV schema.

    ``pv_power = peak * clear_sky(hour) * seasonal(day) * clearness`` where
    clearness in [0.05, 1] follows a reflected AR(1) cloud process.
    Irradiance tracks clear_sky * clearness through noisy sensors; humidity
    falls as irradiance rises; wind is unrelated to output.
    """
    start_ts, offset = parse_timestamp(c.start)
    n = c.n_days * c.steps_per_day
    sec = np.arange(n, dtype=np.int64) * c.cadence_s
    local = (start_ts + offset + sec) % DAY_S
    hour = local / 3600.0
    day = sec // DAY_S
    cs = clear_sky(hour)
    season = seasonal_factor(day, c.seasonal_amplitude)

    rng = stream(c.seed, "synth")
    phi = math.exp(-c.cadence_s / c.cloud_timescale_s)
    e = rng.standard_normal(n) * c.cloud_noise_sd * math.sqrt(1.0 - phi * phi)
    if n:
        e[0] = e[0] / math.sqrt(1.0 - phi * phi) if phi < 1 else e[0]
    u = lfilter([1.0], [1.0, -phi], e)
    clearness = np.clip(1.0 - np.abs(u), 0.05, 1.0)

    target = c.peak_power_w * cs * season * clearness

    sun = cs * clearness
    ghi = 1000.0 * sun * season * np.maximum(0.0, 1.0 + 0.03 * rng.standard_normal(n))
    dhi = 1000.0 * cs * (0.12 + 0.6 * (1.0 - clearness)) * np.maximum(0.0, 1.0 + 0.05 * rng.standard_normal(n))
    air_temp = (22.0 + 7.0 * np.sin(2.0 * np.pi * (hour - 9.0) / 24.0)
                + 8.0 * np.sin(2.0 * np.pi * day / 365.0) + 0.8 * rng.standard_normal(n))
    rel_humidity = np.clip(55.0 - 25.0 * sun - 0.5 * (air_temp - 22.0)
                           + 4.0 * rng.standard_normal(n), 0.0, 100.0)
    wind_speed = np.abs(3.0 + 1.5 * rng.standard_normal(n))
    wind_dir = rng.uniform(0.0, 360.0, n)

    X = np.column_stack([air_temp, rel_humidity, wind_speed, wind_dir, ghi, dhi])
    return Dataset(start_ts + sec, WEATHER_FEATURES, X, target,
                   cadence_s=c.cadence_s, utc_offset_s=offset)
