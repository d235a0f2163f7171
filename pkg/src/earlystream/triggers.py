"""Trigger rules deciding, per (target, time), whether to emit the prediction.

Each rule is a pure function of the current horizon and posterior.  The
engine consults triggers through small adapter objects; adapters also
expose ``fire_grid`` (the same rule vectorized over a matrix of horizons
and posteriors) so runs and tuning sweeps stay fast.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import HorizonRange, TriggerDecision, ValidationError

SR_GAMMA_VALUES = (-1.0, -0.5, 0.0, 0.5, 1.0)
CC_THETA_GRID = tuple(i / 20 for i in range(21))


@dataclass
class TriggerContext:
    """What a trigger may look at: current horizon and classifier posterior."""

    eta: int
    posterior: float
    horizon_range: HorizonRange
    economy_state: Optional[object] = None


@dataclass(frozen=True)
class SRParams:
    gamma1: float
    gamma2: float
    gamma3: float

    def __post_init__(self):
        for g in (self.gamma1, self.gamma2, self.gamma3):
            if not -1.0 <= g <= 1.0:
                raise ValidationError(f"SR gammas must lie in [-1, 1], got {g}")

    def astuple(self) -> tuple[float, float, float]:
        return (self.gamma1, self.gamma2, self.gamma3)


@dataclass(frozen=True)
class CCParams:
    threshold: float

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"threshold must lie in [0, 1], got {self.threshold}")


def sr_trigger(ctx: TriggerContext, params: SRParams) -> TriggerDecision:
    """Fire iff g1*p1 + g2*p2 + g3*r > 0.

    ``p1`` is the larger of the two posteriors, ``p2 = 2*p1 - 1`` their
    difference (the binary case), and ``r`` the relative position of the
    horizon in its range (0 at eta_max, 1 at eta_min).
    """
    p = ctx.posterior
    p1 = max(p, 1.0 - p)
    p2 = 2.0 * p1 - 1.0
    r = ctx.horizon_range.relative_position(ctx.eta)
    score = params.gamma1 * p1 + params.gamma2 * p2 + params.gamma3 * r
    return TriggerDecision.FIRE if score > 0.0 else TriggerDecision.WAIT


def cc_trigger(ctx: TriggerContext, params: CCParams) -> TriggerDecision:
    """Fire as soon as the failure-class posterior exceeds the threshold."""
    if ctx.posterior > params.threshold:
        return TriggerDecision.FIRE
    return TriggerDecision.WAIT


def early_trigger(ctx: TriggerContext) -> TriggerDecision:
    """Fire at the first opportunity (eta_max, or the first evaluable horizon)."""
    return TriggerDecision.FIRE


def late_trigger(ctx: TriggerContext) -> TriggerDecision:
    """Never fire; decisions happen through forcing at eta_min or end of data."""
    return TriggerDecision.WAIT


# ---------------------------------------------------------------------------
# engine adapters
# ---------------------------------------------------------------------------

class SRTrigger:
    def __init__(self, params: SRParams):
        self.params = params

    def decide(self, ctx: TriggerContext) -> TriggerDecision:
        return sr_trigger(ctx, self.params)

    def fire_grid(self, etas, posteriors, horizon_range: HorizonRange):
        g1, g2, g3 = self.params.astuple()
        p1 = np.maximum(posteriors, 1.0 - posteriors)
        p2 = 2.0 * p1 - 1.0
        r = (horizon_range.eta_max - etas) / horizon_range.span
        return g1 * p1 + g2 * p2 + g3 * r > 0.0

    def describe(self) -> dict:
        return {"gamma1": self.params.gamma1, "gamma2": self.params.gamma2,
                "gamma3": self.params.gamma3}


class CCTrigger:
    def __init__(self, params: CCParams):
        self.params = params

    def decide(self, ctx: TriggerContext) -> TriggerDecision:
        return cc_trigger(ctx, self.params)

    def fire_grid(self, etas, posteriors, horizon_range: HorizonRange):
        return posteriors > self.params.threshold

    def describe(self) -> dict:
        return {"threshold": self.params.threshold}


class EarlyTrigger:
    def decide(self, ctx: TriggerContext) -> TriggerDecision:
        return early_trigger(ctx)

    def fire_grid(self, etas, posteriors, horizon_range: HorizonRange):
        return np.ones(np.shape(posteriors), dtype=bool)

    def describe(self) -> dict:
        return {}


class LateTrigger:
    def decide(self, ctx: TriggerContext) -> TriggerDecision:
        return late_trigger(ctx)

    def fire_grid(self, etas, posteriors, horizon_range: HorizonRange):
        return np.zeros(np.shape(posteriors), dtype=bool)

    def describe(self) -> dict:
        return {}


# ---------------------------------------------------------------------------
# validation-set tuning
# ---------------------------------------------------------------------------

def tune_sr(
    collection,
    validation_series,
    cost_model,
    gamma_grid: Optional[Sequence[tuple[float, float, float]]] = None,
    grids: Optional[dict] = None,
) -> SRParams:
    """Exhaustive sweep of the gamma cube by validation AvgCost.

    Ties go to the lexicographically smallest (gamma1, gamma2, gamma3).
    """
    from .streaming import build_grids, dataset_avg_cost

    if gamma_grid is None:
        gamma_grid = list(itertools.product(SR_GAMMA_VALUES, repeat=3))
    if not gamma_grid:
        raise ValidationError("gamma_grid must be nonempty")
    if grids is None:
        grids = build_grids(validation_series, collection)
    best, best_cost = None, None
    for triple in sorted(gamma_grid):
        params = SRParams(*triple)
        cost = dataset_avg_cost(
            validation_series, collection, SRTrigger(params), cost_model, grids=grids
        )
        if best_cost is None or cost < best_cost:
            best, best_cost = params, cost
    return best


def tune_cc(
    collection,
    validation_series,
    cost_model,
    theta_grid: Optional[Sequence[float]] = None,
    grids: Optional[dict] = None,
) -> CCParams:
    """Sweep the confidence threshold by validation AvgCost; ties pick the smaller theta."""
    from .streaming import build_grids, dataset_avg_cost

    if theta_grid is None:
        theta_grid = CC_THETA_GRID
    if not theta_grid:
        raise ValidationError("theta_grid must be nonempty")
    if grids is None:
        grids = build_grids(validation_series, collection)
    best, best_cost = None, None
    for theta in sorted(theta_grid):
        params = CCParams(float(theta))
        cost = dataset_avg_cost(
            validation_series, collection, CCTrigger(params), cost_model, grids=grids
        )
        if best_cost is None or cost < best_cost:
            best, best_cost = params, cost
    return best
