"""Deterministic online decision engine over one open time series.

Time advances one step at a time; at each step every timestamp whose
horizon falls inside ``[eta_min, eta_max]`` is pending, the trigger is
consulted for each (in increasing target order), and decisions are forced
at ``eta_min`` or at the end of the data so that every timestamp in
``[1, T]`` ends up with exactly one decision record.

``run_stream`` consumes a precomputed posterior grid (one posterior per
(window end, horizon) pair), so a decision made at time ``t`` can only
ever see measurements with index ``<= t``.  Triggers exposing a
vectorized ``fire_grid`` are run through an equivalent batched planner;
``run_stream_reference`` is the plain sequential loop and the test suite
asserts both produce identical records.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    CostModel,
    DataError,
    OpenTimeSeries,
    TriggerDecision,
    ValidationError,
)
from .data import feature_matrix
from .triggers import TriggerContext


@dataclass(frozen=True)
class PendingTarget:
    """An undecided target and the time span over which it can be evaluated."""

    t_p: int
    first_evaluable_t: int
    last_evaluable_t: int


@dataclass(frozen=True)
class DecisionRecord:
    """One emitted prediction: where, when, what, and what it cost."""

    t_p: int
    t: int
    eta: int
    y_hat: int
    y: int
    cm_cost: float
    cd_cost: float
    forced: bool


class PosteriorGrid:
    """Posterior of h_eta on the window ending at t, for all (t, eta) pairs."""

    def __init__(self, values: np.ndarray, w: int, eta_min: int, eta_max: int):
        self.values = values  # (T - w + 1, eta_max - eta_min + 1)
        self.w = w
        self.eta_min = eta_min
        self.eta_max = eta_max

    @classmethod
    def build(cls, series: OpenTimeSeries, collection) -> "PosteriorGrid":
        hr = collection.horizon_range
        fm = feature_matrix(series, hr.window)
        values = np.empty((fm.shape[0], hr.n_horizons), dtype=np.float64)
        for j, eta in enumerate(hr.horizons()):
            values[:, j] = collection.classifier(eta).predict_proba_batch(fm)
        return cls(values, hr.window, hr.eta_min, hr.eta_max)

    def at(self, t: int, eta: int) -> float:
        """Posterior at window end ``t`` for horizon ``eta`` (clamped to eta_min below)."""
        j = max(eta, self.eta_min) - self.eta_min
        return float(self.values[t - self.w, j])


def build_grids(series_list: Sequence[OpenTimeSeries], collection) -> dict:
    return {s.series_id: PosteriorGrid.build(s, collection) for s in series_list}


def _delay_engine(eta: int, model: CostModel) -> float:
    # below-range horizons occur only for boundary targets when eta_min > -w;
    # their delay cost saturates at the eta_min value
    hr = model.horizon_range
    e = max(eta, hr.eta_min)
    if model.delay_fn is not None:
        return float(model.delay_fn(e))
    return model.alpha * (hr.eta_max - e) / hr.span


def _delay_engine_vec(etas: np.ndarray, model: CostModel) -> np.ndarray:
    hr = model.horizon_range
    e = np.maximum(etas, hr.eta_min)
    if model.delay_fn is not None:
        return np.array([float(model.delay_fn(int(v))) for v in e])
    return model.alpha * (hr.eta_max - e) / hr.span


# ---------------------------------------------------------------------------
# vectorized planner (triggers that are pure in (eta, posterior))
# ---------------------------------------------------------------------------

def _plan_vectorized(series, collection, trigger, cost_model, grid):
    hr = collection.horizon_range
    T, w = series.length, hr.window
    H = hr.n_horizons
    V = grid.values

    t_p = np.arange(1, T + 1)
    etas = hr.eta_max - np.arange(H)  # column k holds horizon eta_max - k
    rows = (t_p - hr.eta_max - w)[:, None] + np.arange(H)[None, :]
    valid = (rows >= 0) & (rows <= T - w)
    cols = (H - 1) - np.arange(H)
    P = V[np.clip(rows, 0, T - w), cols[None, :]]

    fire = np.asarray(trigger.fire_grid(etas, P, hr), dtype=bool) & valid

    # forced decision at the last evaluable column (eta_min, or t == T)
    eta_last = np.maximum(hr.eta_min, t_p - T)
    k_last = hr.eta_max - eta_last
    pathological = t_p < w + hr.eta_min  # possible only when eta_min > -w
    k_last = np.where(pathological, H - 1, k_last)
    decide = fire.copy()
    decide[np.arange(T), k_last] = True
    k_star = np.argmax(decide, axis=1)

    eta_star = hr.eta_max - k_star
    posterior = P[np.arange(T), k_star]
    forced = ~fire[np.arange(T), k_star]
    if pathological.any():
        idx = np.flatnonzero(pathological)
        eta_star[idx] = t_p[idx] - w
        posterior[idx] = V[0, 0]  # h_{eta_min} on the first window
        forced[idx] = True
    t_star = t_p - eta_star

    y_hat = (posterior > 0.5).astype(np.int8)
    y = series.labels
    cm_cost = cost_model.cm[y_hat, y]
    cd_cost = _delay_engine_vec(eta_star, cost_model)
    return t_p, t_star, eta_star, y_hat, y, cm_cost, cd_cost, forced


# ---------------------------------------------------------------------------
# sequential reference engine
# ---------------------------------------------------------------------------

def run_stream_reference(
    series: OpenTimeSeries,
    collection,
    trigger,
    cost_model: CostModel,
    grid: Optional[PosteriorGrid] = None,
) -> list[DecisionRecord]:
    """Plain state-machine engine: advance t, enqueue, consult, force."""
    hr = collection.horizon_range
    T, w = series.length, hr.window
    if T < w:
        raise ValidationError(f"series length {T} shorter than window {w}")
    if grid is None:
        grid = PosteriorGrid.build(series, collection)

    records = []
    pending: list[PendingTarget] = []
    next_target = 1
    for t in range(w, T + 1):
        hi = min(T, t + hr.eta_max)
        while next_target <= hi:
            t_p = next_target
            next_target += 1
            if t_p < w + hr.eta_min:
                # even the eta_min window never fits; decide on the first
                # window with the true (below-range) horizon, flagged forced
                eta = t_p - w
                p = grid.at(w, hr.eta_min)
                records.append(
                    _record(t_p, w, eta, p, series, cost_model, forced=True)
                )
                continue
            pending.append(
                PendingTarget(
                    t_p=t_p,
                    first_evaluable_t=max(w, t_p - hr.eta_max),
                    last_evaluable_t=min(T, t_p - hr.eta_min),
                )
            )
        still_pending = []
        for target in pending:  # kept sorted by increasing t_p
            t_p = target.t_p
            if t_p > hi:
                still_pending.append(target)
                continue
            eta = t_p - t
            p = grid.at(t, eta)
            ctx = TriggerContext(eta=eta, posterior=p, horizon_range=hr)
            fired = trigger.decide(ctx) is TriggerDecision.FIRE
            if fired or eta == hr.eta_min or t == T:
                records.append(
                    _record(t_p, t, eta, p, series, cost_model, forced=not fired)
                )
            else:
                still_pending.append(target)
        pending = still_pending
    records.sort(key=lambda r: r.t_p)
    return records


def _record(t_p, t, eta, posterior, series, cost_model, forced) -> DecisionRecord:
    y_hat = int(posterior > 0.5)
    y = int(series.labels[t_p - 1])
    return DecisionRecord(
        t_p=t_p,
        t=t,
        eta=eta,
        y_hat=y_hat,
        y=y,
        cm_cost=float(cost_model.cm[y_hat, y]),
        cd_cost=_delay_engine(eta, cost_model),
        forced=bool(forced),
    )


def run_stream(
    series: OpenTimeSeries,
    collection,
    trigger,
    cost_model: CostModel,
    grid: Optional[PosteriorGrid] = None,
) -> list[DecisionRecord]:
    """Decide every timestamp of the series; one record per t_p in [1, T]."""
    hr = collection.horizon_range
    if series.length < hr.window:
        raise ValidationError(
            f"series length {series.length} shorter than window {hr.window}"
        )
    if not hasattr(trigger, "fire_grid"):
        return run_stream_reference(series, collection, trigger, cost_model, grid)
    if grid is None:
        grid = PosteriorGrid.build(series, collection)
    t_p, t_star, eta_star, y_hat, y, cm_cost, cd_cost, forced = _plan_vectorized(
        series, collection, trigger, cost_model, grid
    )
    return [
        DecisionRecord(
            t_p=int(t_p[i]),
            t=int(t_star[i]),
            eta=int(eta_star[i]),
            y_hat=int(y_hat[i]),
            y=int(y[i]),
            cm_cost=float(cm_cost[i]),
            cd_cost=float(cd_cost[i]),
            forced=bool(forced[i]),
        )
        for i in range(len(t_p))
    ]


# ---------------------------------------------------------------------------
# cost aggregation
# ---------------------------------------------------------------------------

def avg_cost_series(
    records: Sequence[DecisionRecord], T: int, cost_model: CostModel
) -> float:
    """Mean combined cost over all T timestamps, recomputed from (y_hat, y, eta)."""
    if sorted(r.t_p for r in records) != list(range(1, T + 1)):
        raise ValidationError(f"records must cover 1..{T} exactly once")
    total = 0.0
    for r in records:
        total += float(cost_model.cm[r.y_hat, r.y]) + _delay_engine(r.eta, cost_model)
    return total / T


def avg_cost_dataset(per_series_costs: Sequence[float]) -> float:
    """Unweighted mean of per-series average costs."""
    costs = list(per_series_costs)
    if not costs:
        raise ValidationError("avg_cost_dataset needs at least one series cost")
    return float(sum(costs) / len(costs))


def dataset_avg_cost(
    series_list: Sequence[OpenTimeSeries],
    collection,
    trigger,
    cost_model: CostModel,
    grids: Optional[dict] = None,
) -> float:
    """Dataset AvgCost via the engine; fast path skips record materialization."""
    if not series_list:
        raise ValidationError("dataset_avg_cost needs at least one series")
    per_series = []
    for series in series_list:
        grid = grids.get(series.series_id) if grids else None
        if hasattr(trigger, "fire_grid"):
            if grid is None:
                grid = PosteriorGrid.build(series, collection)
            *_ignored, cm_cost, cd_cost, _forced = _plan_vectorized(
                series, collection, trigger, cost_model, grid
            )
            per_series.append(float(np.sum(cm_cost + cd_cost)) / series.length)
        else:
            records = run_stream(series, collection, trigger, cost_model, grid=grid)
            per_series.append(avg_cost_series(records, series.length, cost_model))
    return avg_cost_dataset(per_series)


def horizon_histogram(records: Sequence[DecisionRecord]) -> dict[int, int]:
    """Counts of decision horizons; values sum to the number of records."""
    out: dict[int, int] = {}
    for r in records:
        out[r.eta] = out.get(r.eta, 0) + 1
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# decision log
# ---------------------------------------------------------------------------

_LOG_HEADER = ["series_id", "t_p", "t", "eta", "y_hat", "y", "cm_cost", "cd_cost", "forced"]


def write_decision_log(path, per_series: Iterable[tuple[str, Sequence[DecisionRecord]]]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_LOG_HEADER)
        for series_id, records in per_series:
            for r in records:
                writer.writerow(
                    [
                        series_id,
                        r.t_p,
                        r.t,
                        r.eta,
                        r.y_hat,
                        r.y,
                        repr(r.cm_cost),
                        repr(r.cd_cost),
                        int(r.forced),
                    ]
                )


def read_decision_log(path) -> dict[str, list[DecisionRecord]]:
    out: dict[str, list[DecisionRecord]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _LOG_HEADER:
            raise DataError(f"{path}: unexpected decision log header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                out.setdefault(row[0], []).append(
                    DecisionRecord(
                        t_p=int(row[1]),
                        t=int(row[2]),
                        eta=int(row[3]),
                        y_hat=int(row[4]),
                        y=int(row[5]),
                        cm_cost=float(row[6]),
                        cd_cost=float(row[7]),
                        forced=bool(int(row[8])),
                    )
                )
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out
