"""Shared domain types and the elementary cost computations.

Conventions used throughout the package:

* timestamps are 1-indexed; a sliding window of width ``w`` ending at
  time ``t`` covers ``[t - w + 1, t]`` inclusive (exactly ``w`` rows);
* a horizon ``eta`` is the lag between a target timestamp and the end of
  the current window, ``eta = t_p - t``; positive horizons predict ahead,
  negative ones label a timestamp already inside the window;
* classes are binary, 0 = normal and 1 = failure/abnormal;
* the misclassification cost matrix is indexed ``cm[predicted][actual]``
  and displayed as ``[[TN, FN], [FP, TP]]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np


class ValidationError(ValueError):
    """Invalid configuration or arguments supplied by the caller."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class InternalError(RuntimeError):
    """An internal invariant was violated; indicates a bug."""


class TriggerDecision(Enum):
    """Outcome of consulting a trigger for one (target, time) pair."""

    WAIT = "wait"
    FIRE = "fire"


@dataclass(frozen=True)
class HorizonRange:
    """Inclusive horizon span ``[eta_min, eta_max]`` plus window width."""

    eta_min: int
    eta_max: int
    window: int

    def __post_init__(self):
        if self.window < 1:
            raise ValidationError(f"window must be >= 1, got {self.window}")
        if self.eta_max <= 0:
            raise ValidationError(f"eta_max must be > 0, got {self.eta_max}")
        if self.eta_min >= self.eta_max:
            raise ValidationError(
                f"eta_min must be < eta_max, got [{self.eta_min}, {self.eta_max}]"
            )
        if self.eta_min < -self.window:
            raise ValidationError(
                f"eta_min must be >= -window, got eta_min={self.eta_min} window={self.window}"
            )

    @property
    def span(self) -> int:
        return self.eta_max - self.eta_min

    @property
    def n_horizons(self) -> int:
        return self.span + 1

    def horizons(self) -> range:
        """All horizons from eta_min to eta_max inclusive."""
        return range(self.eta_min, self.eta_max + 1)

    def contains(self, eta: int) -> bool:
        return self.eta_min <= eta <= self.eta_max

    def require(self, eta: int) -> None:
        if not self.contains(eta):
            raise ValidationError(
                f"horizon {eta} outside [{self.eta_min}, {self.eta_max}]"
            )

    def relative_position(self, eta: int) -> float:
        """Relative position of ``eta`` in the range: 0 at eta_max, 1 at eta_min."""
        return (self.eta_max - eta) / self.span


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class OpenTimeSeries:
    """A labeled open time series: telemetry, error flags and one class per timestamp.

    ``telemetry`` is (T, p) float, ``errors`` (T, e) bool, ``labels`` (T,) in {0, 1}.
    Arrays are made read-only so instances can be shared across workers.
    """

    series_id: str
    telemetry: np.ndarray
    errors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        tel = np.asarray(self.telemetry, dtype=np.float64)
        if tel.ndim != 2 or tel.shape[0] < 1 or tel.shape[1] < 1:
            raise ValidationError(
                f"telemetry must be a (T>=1, p>=1) matrix, got shape {tel.shape}"
            )
        T = tel.shape[0]
        err = np.asarray(self.errors)
        if err.size == 0:
            err = err.reshape(T, 0)
        err = err.astype(bool)
        if err.ndim != 2 or err.shape[0] != T:
            raise ValidationError(
                f"errors must be a (T, e) matrix aligned with telemetry, got {err.shape}"
            )
        lab = np.asarray(self.labels)
        if lab.shape != (T,):
            raise ValidationError(
                f"labels must have length T={T}, got shape {lab.shape}"
            )
        if not np.isin(lab, (0, 1)).all():
            raise ValidationError("labels must contain only 0 or 1")
        object.__setattr__(self, "telemetry", _readonly(tel))
        object.__setattr__(self, "errors", _readonly(err))
        object.__setattr__(self, "labels", _readonly(lab.astype(np.int8)))

    @property
    def length(self) -> int:
        return self.telemetry.shape[0]

    @property
    def n_telemetry(self) -> int:
        return self.telemetry.shape[1]

    @property
    def n_error_types(self) -> int:
        return self.errors.shape[1]


@dataclass(frozen=True)
class CostModel:
    """Misclassification matrix plus a delay cost over a horizon range.

    ``cm[predicted][actual]`` holds nonnegative costs with the display
    convention [[TN, FN], [FP, TP]].  The delay cost is linear by default,
    ``alpha * (eta_max - eta) / (eta_max - eta_min)``; ``delay_fn`` is a
    hook for alternative horizon->cost shapes, but only the linear form is
    shipped and exercised by the test suite.
    """

    cm: np.ndarray
    alpha: float
    horizon_range: HorizonRange
    delay_fn: Optional[Callable[[int], float]] = field(default=None, compare=False)

    def __post_init__(self):
        cm = np.asarray(self.cm, dtype=np.float64)
        if cm.shape != (2, 2):
            raise ValidationError(f"cm must be 2x2, got shape {cm.shape}")
        if not np.isfinite(cm).all() or (cm < 0).any():
            raise ValidationError("cm entries must be finite and >= 0")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValidationError(f"alpha must be finite and >= 0, got {self.alpha}")
        object.__setattr__(self, "cm", _readonly(cm))
        object.__setattr__(self, "alpha", float(self.alpha))


def delay_cost(eta: int, model: CostModel) -> float:
    """Cost of deciding at horizon ``eta``: 0 at eta_max, alpha at eta_min."""
    model.horizon_range.require(eta)
    if model.delay_fn is not None:
        return float(model.delay_fn(eta))
    hr = model.horizon_range
    return model.alpha * (hr.eta_max - eta) / hr.span


def misclassification_cost(predicted: int, actual: int, model: CostModel) -> float:
    """Cost ``cm[predicted][actual]`` of predicting ``predicted`` when truth is ``actual``."""
    if predicted not in (0, 1) or actual not in (0, 1):
        raise ValidationError(
            f"classes must be 0 or 1, got predicted={predicted} actual={actual}"
        )
    return float(model.cm[predicted, actual])


def combined_cost(predicted: int, actual: int, eta: int, model: CostModel) -> float:
    """Misclassification cost plus delay cost for one decision."""
    return misclassification_cost(predicted, actual, model) + delay_cost(eta, model)
