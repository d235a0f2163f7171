"""Dataset ingestion, splitting, target selection, windows, features, generation.

Window features are plain 1-D float arrays with a fixed layout: for each
telemetry channel in source order the four statistics (min, max, mean,
median), followed by one within-window event count per error channel in
source order — ``4 * p + e`` values in total.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import DataError, HorizonRange, OpenTimeSeries, ValidationError

SPLIT_NAMES = ("train", "test", "validation", "estimation")
SPLIT_PROPORTIONS = {"train": 0.50, "test": 0.20, "validation": 0.15, "estimation": 0.15}

FEATURE_STATS = ("min", "max", "mean", "median")


@dataclass(frozen=True)
class RawWindow:
    """``w`` consecutive rows of telemetry and error flags, in time order."""

    telemetry: np.ndarray  # (w, p)
    errors: np.ndarray  # (w, e)


@dataclass(frozen=True)
class HorizonDataset:
    """Training examples for one horizon, aligned across horizons by target id."""

    eta: int
    target_ids: tuple  # ((series_id, t_p), ...) in a fixed order
    features: np.ndarray  # (n, 4p + e)
    labels: np.ndarray  # (n,) int8 in {0, 1}

    def __len__(self) -> int:
        return len(self.target_ids)


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint series sets for classifier training, testing, validation, estimation."""

    train: tuple
    test: tuple
    validation: tuple
    estimation: tuple

    def all_series(self) -> tuple:
        return self.train + self.test + self.validation + self.estimation


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the synthetic open-time-series generator.

    Failures appear as contiguous label-1 chunks (duration drawn uniformly
    from [3, 8]).  With probability ``premise_fire_prob`` a failure is
    preceded — at a lead time drawn uniformly from
    [premise_lag_low, premise_lag_high] — by a 3-step burst of flags on one
    error channel together with a linear telemetry drift that ramps from 0
    up to ``telemetry_drift_amplitude`` on one telemetry channel between
    the burst and the failure onset.  Background error noise fires
    independently per (timestamp, channel) at ``noise_error_rate``.

    Feasibility with respect to a horizon range (``length > window + eta_max``)
    is checked where the range is known, i.e. in the harness config.
    """

    seed: int
    num_series: int
    length: int
    num_telemetry: int = 3
    num_error_types: int = 2
    failure_rate: float = 8.0  # expected failures per series
    premise_lag_low: int = 15
    premise_lag_high: int = 40
    premise_fire_prob: float = 0.85
    noise_error_rate: float = 0.05
    telemetry_drift_amplitude: float = 2.5

    def __post_init__(self):
        if self.num_series < 0:
            raise ValidationError(f"num_series must be >= 0, got {self.num_series}")
        if self.length < 1:
            raise ValidationError(f"length must be >= 1, got {self.length}")
        if self.num_telemetry < 1:
            raise ValidationError("num_telemetry must be >= 1")
        if self.num_error_types < 0:
            raise ValidationError("num_error_types must be >= 0")
        if self.failure_rate < 0:
            raise ValidationError("failure_rate must be >= 0")
        for name in ("premise_fire_prob", "noise_error_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {v}")
        if not 1 <= self.premise_lag_low <= self.premise_lag_high:
            raise ValidationError(
                "premise lags must satisfy 1 <= premise_lag_low <= premise_lag_high"
            )
        if self.telemetry_drift_amplitude < 0:
            raise ValidationError("telemetry_drift_amplitude must be >= 0")


# ---------------------------------------------------------------------------
# windows and features
# ---------------------------------------------------------------------------

def extract_window(series: OpenTimeSeries, end_t: int, w: int) -> RawWindow:
    """The ``w`` rows ending at 1-indexed timestamp ``end_t`` inclusive."""
    if w < 1:
        raise ValidationError(f"window width must be >= 1, got {w}")
    if end_t < w or end_t > series.length:
        raise ValidationError(
            f"window end {end_t} outside [{w}, {series.length}] for w={w}"
        )
    return RawWindow(
        telemetry=series.telemetry[end_t - w : end_t],
        errors=series.errors[end_t - w : end_t],
    )


def feature_names(p: int, e: int) -> list[str]:
    names = [f"tel{c + 1}_{s}" for c in range(p) for s in FEATURE_STATS]
    names += [f"err{j + 1}_count" for j in range(e)]
    return names


def extract_features(window: RawWindow) -> np.ndarray:
    """Per-channel (min, max, mean, median) then per-error-channel counts."""
    tel = window.telemetry
    if not np.isfinite(tel).all():
        raise DataError("non-finite telemetry value inside window")
    p = tel.shape[1]
    out = np.empty(4 * p + window.errors.shape[1], dtype=np.float64)
    out[0 : 4 * p : 4] = np.min(tel, axis=0)
    out[1 : 4 * p : 4] = np.max(tel, axis=0)
    out[2 : 4 * p : 4] = np.mean(tel, axis=0)
    out[3 : 4 * p : 4] = np.median(tel, axis=0)
    out[4 * p :] = np.sum(window.errors, axis=0, dtype=np.float64)
    return out


def feature_matrix(series: OpenTimeSeries, w: int) -> np.ndarray:
    """Features of every window of width ``w``; row i is the window ending at t = w + i.

    Vectorized equivalent of calling :func:`extract_features` on each window
    (the test suite asserts exact agreement).
    """
    T = series.length
    if T < w:
        raise ValidationError(f"series length {T} shorter than window {w}")
    if not np.isfinite(series.telemetry).all():
        raise DataError(f"non-finite telemetry in series {series.series_id!r}")
    p = series.n_telemetry
    e = series.n_error_types
    blocks = sliding_window_view(series.telemetry, w, axis=0)  # (T-w+1, p, w)
    out = np.empty((T - w + 1, 4 * p + e), dtype=np.float64)
    out[:, 0 : 4 * p : 4] = np.min(blocks, axis=2)
    out[:, 1 : 4 * p : 4] = np.max(blocks, axis=2)
    out[:, 2 : 4 * p : 4] = np.mean(blocks, axis=2)
    out[:, 3 : 4 * p : 4] = np.median(blocks, axis=2)
    if e:
        counts = np.cumsum(series.errors, axis=0, dtype=np.int64)
        out[:, 4 * p :] = counts[w - 1 :] - np.vstack(
            [np.zeros((1, e), dtype=np.int64), counts[: T - w]]
        )
    return out


# ---------------------------------------------------------------------------
# targets and horizon datasets
# ---------------------------------------------------------------------------

def select_targets(series: OpenTimeSeries, horizon_range: HorizonRange) -> list[int]:
    """Training targets spaced ``w + eta_max`` apart so windows never overlap.

    A target is kept only while every horizon's window fits inside the
    series (``t_p - eta_min <= T`` and ``t_p <= T``), so each target yields
    one example for every horizon in the range.
    """
    w = horizon_range.window
    step = w + horizon_range.eta_max
    T = series.length
    limit = min(T, T + horizon_range.eta_min)
    return list(range(step, limit + 1, step))


def build_horizon_datasets(
    series_list: Sequence[OpenTimeSeries], horizon_range: HorizonRange
) -> dict[int, HorizonDataset]:
    """One aligned dataset per horizon: example i of every horizon shares a target.

    For target ``t_p`` at horizon ``eta`` the features come from the window
    ending at ``t_p - eta`` and the label is ``labels[t_p]``.
    """
    w = horizon_range.window
    ordered = sorted(series_list, key=lambda s: s.series_id)
    target_ids: list[tuple[str, int]] = []
    labels: list[int] = []
    per_series: list[tuple[OpenTimeSeries, list[int]]] = []
    for series in ordered:
        targets = select_targets(series, horizon_range)
        per_series.append((series, targets))
        for t_p in targets:
            target_ids.append((series.series_id, t_p))
            labels.append(int(series.labels[t_p - 1]))

    n = len(target_ids)
    d = None
    rows_by_eta = {eta: [] for eta in horizon_range.horizons()}
    for series, targets in per_series:
        if not targets:
            continue
        fm = feature_matrix(series, w)
        if d is None:
            d = fm.shape[1]
        for eta in horizon_range.horizons():
            for t_p in targets:
                rows_by_eta[eta].append(fm[t_p - eta - w])
    if d is None:
        d = 4 * (ordered[0].n_telemetry if ordered else 1) + (
            ordered[0].n_error_types if ordered else 0
        )

    ids = tuple(target_ids)
    label_arr = np.asarray(labels, dtype=np.int8)
    out = {}
    for eta in horizon_range.horizons():
        rows = rows_by_eta[eta]
        feats = np.vstack(rows) if rows else np.empty((0, d), dtype=np.float64)
        out[eta] = HorizonDataset(eta=eta, target_ids=ids, features=feats, labels=label_arr)
    return out


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def _split_sizes(n: int) -> dict[str, int]:
    # Every split gets at least one series (hence the >= 4 precondition);
    # the remaining seats follow largest-remainder apportionment of the
    # 50/20/15/15 quotas, remainder ties resolved in SPLIT_NAMES order.
    if n < 4:
        raise ValidationError(f"need at least 4 series to split, got {n}")
    seats = n - 4
    quotas = {k: max(SPLIT_PROPORTIONS[k] * n - 1.0, 0.0) for k in SPLIT_NAMES}
    total = sum(quotas.values())
    if total > 0:
        quotas = {k: q * seats / total for k, q in quotas.items()}
    sizes = {k: 1 + int(np.floor(quotas[k])) for k in SPLIT_NAMES}
    remaining = n - sum(sizes.values())
    order = sorted(
        SPLIT_NAMES,
        key=lambda k: (-(quotas[k] - np.floor(quotas[k])), SPLIT_NAMES.index(k)),
    )
    for k in order[:remaining]:
        sizes[k] += 1
    return sizes


def split_series(series_list: Sequence[OpenTimeSeries], seed: int) -> DatasetSplit:
    """Deterministic 50/20/15/15 split by whole series, never within a series."""
    ordered = sorted(series_list, key=lambda s: s.series_id)
    ids = [s.series_id for s in ordered]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate series_id in input set")
    sizes = _split_sizes(len(ordered))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ordered))
    shuffled = [ordered[i] for i in perm]
    parts = {}
    start = 0
    for name in SPLIT_NAMES:
        parts[name] = tuple(shuffled[start : start + sizes[name]])
        start += sizes[name]
    return DatasetSplit(**parts)


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

_FAILURE_DURATIONS = (3, 8)  # uniform inclusive range of chunk lengths
_BURST_LEN = 3


def _generate_one(series_id: str, cfg: GeneratorConfig, seed) -> OpenTimeSeries:
    rng = np.random.default_rng(seed)
    T, p, e = cfg.length, cfg.num_telemetry, cfg.num_error_types

    # baseline telemetry: unit noise over a slow seasonal component per channel
    t_axis = np.arange(T, dtype=np.float64)
    telemetry = rng.standard_normal((T, p))
    for c in range(p):
        period = rng.uniform(150.0, 400.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        telemetry[:, c] += 0.6 * np.sin(2.0 * np.pi * t_axis / period + phase)

    errors = rng.random((T, e)) < cfg.noise_error_rate if e else np.zeros((T, 0), bool)
    labels = np.zeros(T, dtype=np.int8)

    n_failures = rng.poisson(cfg.failure_rate)
    min_onset = cfg.premise_lag_high + 2  # premises must fit before the onset
    dur_lo, dur_hi = _FAILURE_DURATIONS
    guard = dur_hi + cfg.premise_lag_high
    onsets: list[int] = []
    if T > min_onset + dur_hi:  # too short a series carries no events
        for _ in range(n_failures):
            for _attempt in range(50):
                onset = int(rng.integers(min_onset, T - dur_hi))
                if all(abs(onset - o) > guard for o in onsets):
                    onsets.append(onset)
                    break

    for onset in sorted(onsets):
        duration = int(rng.integers(dur_lo, dur_hi + 1))
        labels[onset : min(onset + duration, T)] = 1
        if rng.random() >= cfg.premise_fire_prob:
            continue
        lag = int(rng.integers(cfg.premise_lag_low, cfg.premise_lag_high + 1))
        start = onset - lag
        if e:
            channel = int(rng.integers(0, e))
            errors[start : min(start + _BURST_LEN, T), channel] = True
        drift_channel = int(rng.integers(0, p))
        ramp = np.arange(1, onset - start + 1, dtype=np.float64) / lag
        telemetry[start:onset, drift_channel] += cfg.telemetry_drift_amplitude * ramp

    return OpenTimeSeries(
        series_id=series_id, telemetry=telemetry, errors=errors, labels=labels
    )


def generate_synthetic(cfg: GeneratorConfig) -> list[OpenTimeSeries]:
    """Seeded, fully deterministic generation; each series gets its own sub-seed."""
    children = np.random.SeedSequence(cfg.seed).spawn(max(cfg.num_series, 1))
    return [
        _generate_one(f"s{i:04d}", cfg, children[i]) for i in range(cfg.num_series)
    ]


# ---------------------------------------------------------------------------
# native dataset format
# ---------------------------------------------------------------------------

def save_series_csv(series_list: Iterable[OpenTimeSeries], path) -> None:
    """Write series to the native CSV layout with round-trip float precision."""
    series_list = sorted(series_list, key=lambda s: s.series_id)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if series_list:
            p, e = series_list[0].n_telemetry, series_list[0].n_error_types
        else:
            p, e = 1, 0
        header = ["series_id", "t"]
        header += [f"tel_{c + 1}" for c in range(p)]
        header += [f"err_{j + 1}" for j in range(e)]
        header.append("label")
        writer.writerow(header)
        for s in series_list:
            for t in range(s.length):
                row = [s.series_id, t + 1]
                row += [repr(float(v)) for v in s.telemetry[t]]
                row += [int(v) for v in s.errors[t]]
                row.append(int(s.labels[t]))
                writer.writerow(row)


def load_series_csv(path) -> list[OpenTimeSeries]:
    """Read the native CSV layout back into series objects."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        if header[:2] != ["series_id", "t"] or header[-1] != "label":
            raise DataError(f"{path}: unrecognized native dataset header {header!r}")
        p = sum(1 for c in header if c.startswith("tel_"))
        e = sum(1 for c in header if c.startswith("err_"))
        if p < 1 or len(header) != 3 + p + e:
            raise DataError(f"{path}: malformed native dataset header {header!r}")
        rows_by_series: dict[str, list] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                t = int(row[1])
                tel = [float(v) for v in row[2 : 2 + p]]
                err = [int(v) for v in row[2 + p : 2 + p + e]]
                label = int(row[-1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            rows_by_series.setdefault(row[0], []).append((lineno, t, tel, err, label))

    out = []
    for sid in sorted(rows_by_series):
        rows = rows_by_series[sid]
        for i, (lineno, t, *_rest) in enumerate(rows):
            if t != i + 1:
                raise DataError(
                    f"{path}:{lineno}: series {sid!r} timestamps must run 1..T, got {t}"
                )
        telemetry = np.array([r[2] for r in rows], dtype=np.float64)
        errors = np.array([r[3] for r in rows], dtype=bool).reshape(len(rows), e)
        labels = np.array([r[4] for r in rows])
        try:
            out.append(
                OpenTimeSeries(
                    series_id=sid, telemetry=telemetry, errors=errors, labels=labels
                )
            )
        except ValidationError as exc:
            raise DataError(f"{path}: series {sid!r}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# public predictive-maintenance layout
# ---------------------------------------------------------------------------

_PDM_TELEMETRY_COLS = ["machineID", "datetime", "volt", "rotate", "pressure", "vibration"]
_HOUR = np.timedelta64(3600, "s")


def _parse_dt(value: str, where: str) -> np.datetime64:
    try:
        return np.datetime64(value.replace(" ", "T"), "s")
    except ValueError as exc:
        raise DataError(f"{where}: bad datetime {value!r}") from exc


def load_pdm_csv(telemetry_path, errors_path, failures_path) -> list[OpenTimeSeries]:
    """Join the three-file public predictive-maintenance layout into series.

    The telemetry file defines an hourly grid per machine; error and failure
    events are mapped onto that grid as Boolean flags and per-timestamp
    labels.  Rows that do not line up (unknown machine, off-grid timestamp,
    malformed field) raise :class:`DataError` with the offending row number.
    """
    telemetry_path, errors_path, failures_path = (
        Path(telemetry_path),
        Path(errors_path),
        Path(failures_path),
    )

    grid: dict[str, list] = {}
    with open(telemetry_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if [c.strip() for c in header] != _PDM_TELEMETRY_COLS:
            raise DataError(
                f"{telemetry_path}:1: expected columns {_PDM_TELEMETRY_COLS}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            where = f"{telemetry_path}:{lineno}"
            if len(row) != 6:
                raise DataError(f"{where}: expected 6 fields, got {len(row)}")
            machine = row[0].strip()
            dt = _parse_dt(row[1].strip(), where)
            try:
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise DataError(f"{where}: {exc}") from exc
            grid.setdefault(machine, []).append((dt, values, lineno))

    series_rows = {}
    for machine, rows in grid.items():
        rows.sort(key=lambda r: r[0])
        times = np.array([r[0] for r in rows])
        gaps = np.flatnonzero(np.diff(times) != _HOUR)
        if gaps.size:
            lineno = rows[gaps[0] + 1][2]
            raise DataError(
                f"{telemetry_path}:{lineno}: machine {machine!r} telemetry "
                f"is not on an hourly grid around {rows[gaps[0] + 1][0]}"
            )
        index = {dt: i for i, (dt, _v, _l) in enumerate(rows)}
        series_rows[machine] = (times, np.array([r[1] for r in rows]), index)

    def read_events(path, value_col):
        events = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return events
            cols = [c.strip() for c in header]
            if cols[:2] != ["machineID", "datetime"] or value_col not in cols:
                raise DataError(
                    f"{path}:1: expected (machineID, datetime, {value_col}), got {header}"
                )
            vi = cols.index(value_col)
            for lineno, row in enumerate(reader, start=2):
                where = f"{path}:{lineno}"
                machine = row[0].strip()
                if machine not in series_rows:
                    raise DataError(f"{where}: unknown machine id {machine!r}")
                dt = _parse_dt(row[1].strip(), where)
                _times, _tel, index = series_rows[machine]
                if dt not in index:
                    raise DataError(
                        f"{where}: timestamp {row[1]!r} not on machine {machine!r} grid"
                    )
                events.append((machine, index[dt], row[vi].strip()))
        return events

    error_events = read_events(errors_path, "errorID")
    failure_events = read_events(failures_path, "failure")

    error_types = sorted({kind for _m, _i, kind in error_events})
    type_index = {kind: j for j, kind in enumerate(error_types)}

    out = []
    for machine in sorted(series_rows, key=lambda m: (len(m), m)):
        _times, tel, _index = series_rows[machine]
        T = tel.shape[0]
        errors = np.zeros((T, len(error_types)), dtype=bool)
        labels = np.zeros(T, dtype=np.int8)
        out.append((machine, tel, errors, labels))
    by_machine = {m: (tel, err, lab) for m, tel, err, lab in out}
    for machine, i, kind in error_events:
        by_machine[machine][1][i, type_index[kind]] = True
    for machine, i, _kind in failure_events:
        by_machine[machine][2][i] = 1

    return [
        OpenTimeSeries(series_id=m, telemetry=tel, errors=err, labels=lab)
        for m, tel, err, lab in out
    ]
