"""Non-myopic expected-cost trigger built on confidence-quantile groups.

Per horizon, classifier posteriors on the estimation split are cut into
``K`` equal-frequency groups.  Each group carries a class prior and a
confusion matrix, and adjacent horizons are linked by row-stochastic
group-transition matrices, all estimated with add-one smoothing.  The
trigger projects the current group membership toward every still-reachable
horizon, sums expected misclassification plus delay cost there, and fires
only when no future horizon is expected to be cheaper.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    CostModel,
    HorizonRange,
    TriggerDecision,
    ValidationError,
    delay_cost,
)
from .data import build_horizon_datasets
from .triggers import TriggerContext


@dataclass
class EconomyModel:
    """Per-horizon group boundaries, transitions, priors and confusions."""

    K: int
    horizon_range: HorizonRange
    boundaries: dict  # eta -> ascending cut points, len <= K - 1
    transitions: dict  # eta -> (G(eta), G(eta-1)) row-stochastic, eta > eta_min
    priors: dict  # eta -> (G(eta), 2) with rows [P(y=0|g), P(y=1|g)]
    confusions: dict  # eta -> (G(eta), 2, 2) with [g, y, y_hat]

    def n_groups(self, eta: int) -> int:
        return len(self.boundaries[eta]) + 1

    def assign_group(self, eta: int, posterior: float) -> int:
        """Left-closed interval containment: a posterior equal to a cut goes up."""
        return int(np.searchsorted(self.boundaries[eta], posterior, side="right"))


def _group_boundaries(posteriors: np.ndarray, K: int) -> np.ndarray:
    cuts = np.quantile(posteriors, [j / K for j in range(1, K)]) if K > 1 else []
    cuts = np.unique(cuts)
    # a cut at or below the minimum separates nothing; dropping it collapses
    # duplicate groups (all-identical posteriors end up with a single group)
    return cuts[cuts > posteriors.min()]


def _smoothed_rows(counts: np.ndarray) -> np.ndarray:
    return (counts + 1.0) / (counts.sum(axis=-1, keepdims=True) + counts.shape[-1])


def fit_economy(
    collection,
    estimation_series: Sequence,
    K: int,
    horizon_range: HorizonRange,
    cost_model: CostModel,
) -> EconomyModel:
    """Estimate the group model from the estimation split's aligned targets."""
    if K < 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    if horizon_range != collection.horizon_range:
        raise ValidationError("horizon_range does not match the collection")
    if not estimation_series:
        raise ValidationError("estimation split is empty")
    datasets = build_horizon_datasets(estimation_series, horizon_range)
    labels = datasets[horizon_range.eta_min].labels
    if len(labels) == 0:
        raise ValidationError("estimation split yields no targets")
    posteriors = {
        eta: collection.classifier(eta).predict_proba_batch(datasets[eta].features)
        for eta in horizon_range.horizons()
    }
    return _fit_from_posteriors(posteriors, labels, K, horizon_range)


def _fit_from_posteriors(
    posteriors: dict, labels: np.ndarray, K: int, horizon_range: HorizonRange
) -> EconomyModel:
    boundaries, priors, confusions, groups_by_eta = {}, {}, {}, {}
    for eta in horizon_range.horizons():
        p = posteriors[eta]
        cuts = _group_boundaries(p, K)
        boundaries[eta] = cuts
        G = len(cuts) + 1
        g = np.searchsorted(cuts, p, side="right")
        groups_by_eta[eta] = g
        y_hat = p > 0.5
        prior_counts = np.zeros((G, 2))
        conf_counts = np.zeros((G, 2, 2))
        np.add.at(prior_counts, (g, labels), 1.0)
        np.add.at(conf_counts, (g, labels, y_hat.astype(np.int8)), 1.0)
        priors[eta] = _smoothed_rows(prior_counts)
        confusions[eta] = _smoothed_rows(conf_counts)

    transitions = {}
    for eta in range(horizon_range.eta_min + 1, horizon_range.eta_max + 1):
        src, dst = groups_by_eta[eta], groups_by_eta[eta - 1]
        counts = np.zeros((len(boundaries[eta]) + 1, len(boundaries[eta - 1]) + 1))
        np.add.at(counts, (src, dst), 1.0)
        transitions[eta] = _smoothed_rows(counts)

    return EconomyModel(
        K=K,
        horizon_range=horizon_range,
        boundaries=boundaries,
        transitions=transitions,
        priors=priors,
        confusions=confusions,
    )


def current_membership(model: EconomyModel, eta: int, posterior: float) -> np.ndarray:
    """One-hot membership of the observed posterior at its horizon."""
    model.horizon_range.require(eta)
    m = np.zeros(model.n_groups(eta))
    m[model.assign_group(eta, posterior)] = 1.0
    return m


def project_membership(
    model: EconomyModel, from_eta: int, to_eta: int, membership: np.ndarray
) -> np.ndarray:
    """Chain membership through the transition matrices down to ``to_eta`` <= ``from_eta``."""
    model.horizon_range.require(from_eta)
    model.horizon_range.require(to_eta)
    if to_eta > from_eta:
        raise ValidationError(
            f"cannot project backward in time: {to_eta} > {from_eta}"
        )
    m = np.asarray(membership, dtype=np.float64)
    for eta in range(from_eta, to_eta, -1):
        m = m @ model.transitions[eta]
    return m


def expected_cost_at(
    model: EconomyModel, cost_model: CostModel, membership: np.ndarray, eta: int
) -> float:
    """Group-weighted expected misclassification cost plus the delay cost at ``eta``."""
    cm = cost_model.cm
    prior = model.priors[eta]  # (G, 2)
    conf = model.confusions[eta]  # (G, y, y_hat)
    # per group: sum_y P(y|g) * sum_yhat P(yhat|y,g) * cm[yhat, y]
    per_group = (
        prior[:, 0] * (conf[:, 0, 0] * cm[0, 0] + conf[:, 0, 1] * cm[1, 0])
        + prior[:, 1] * (conf[:, 1, 0] * cm[0, 1] + conf[:, 1, 1] * cm[1, 1])
    )
    return float(np.asarray(membership) @ per_group + delay_cost(eta, cost_model))


def economy_trigger(
    model: EconomyModel, cost_model: CostModel, ctx: TriggerContext
) -> TriggerDecision:
    """Fire iff no reachable future horizon has a strictly lower expected cost."""
    eta_c = ctx.eta
    m = current_membership(model, eta_c, ctx.posterior)
    return _fires_from(model, cost_model, eta_c, m)


def _fires_from(model, cost_model, eta_c, membership) -> TriggerDecision:
    cost_now = expected_cost_at(model, cost_model, membership, eta_c)
    m = membership
    for eta in range(eta_c - 1, model.horizon_range.eta_min - 1, -1):
        m = m @ model.transitions[eta + 1]
        if expected_cost_at(model, cost_model, m, eta) < cost_now:
            return TriggerDecision.WAIT
    return TriggerDecision.FIRE


class EconomyTrigger:
    """Engine adapter; decisions depend only on (horizon, group), so they are tabulated."""

    def __init__(self, model: EconomyModel, cost_model: CostModel):
        self.model = model
        self.cost_model = cost_model
        self._table = {}
        for eta in model.horizon_range.horizons():
            fires = np.zeros(model.n_groups(eta), dtype=bool)
            for g in range(model.n_groups(eta)):
                one_hot = np.zeros(model.n_groups(eta))
                one_hot[g] = 1.0
                fires[g] = (
                    _fires_from(model, cost_model, eta, one_hot)
                    is TriggerDecision.FIRE
                )
            self._table[eta] = fires

    def decide(self, ctx: TriggerContext) -> TriggerDecision:
        fires = self._table[ctx.eta][self.model.assign_group(ctx.eta, ctx.posterior)]
        return TriggerDecision.FIRE if fires else TriggerDecision.WAIT

    def fire_grid(self, etas, posteriors, horizon_range):
        out = np.empty(np.shape(posteriors), dtype=bool)
        for k, eta in enumerate(etas):
            eta = int(eta)
            g = np.searchsorted(self.model.boundaries[eta], posteriors[:, k], side="right")
            out[:, k] = self._table[eta][g]
        return out

    def describe(self) -> dict:
        return {"K": self.model.K}


def fit_economy_models(
    collection, estimation_series: Sequence, k_grid: Sequence[int]
) -> dict[int, EconomyModel]:
    """Fit one model per candidate K; the fit itself is cost-independent."""
    if not k_grid:
        raise ValidationError("k_grid must be nonempty")
    hr = collection.horizon_range
    datasets = build_horizon_datasets(estimation_series, hr)
    labels = datasets[hr.eta_min].labels
    if len(labels) == 0:
        raise ValidationError("estimation split yields no targets")
    posteriors = {
        eta: collection.classifier(eta).predict_proba_batch(datasets[eta].features)
        for eta in hr.horizons()
    }
    return {
        int(K): _fit_from_posteriors(posteriors, labels, int(K), hr)
        for K in sorted(set(int(k) for k in k_grid))
    }


def select_economy(
    models_by_k: dict,
    collection,
    validation_series: Sequence,
    cost_model: CostModel,
    grids: Optional[dict] = None,
) -> tuple[int, EconomyModel]:
    """Pick the group count by validation AvgCost; ties keep the smaller K."""
    from .streaming import build_grids, dataset_avg_cost

    if grids is None:
        grids = build_grids(validation_series, collection)
    best = None
    for K in sorted(models_by_k):
        model = models_by_k[K]
        cost = dataset_avg_cost(
            validation_series,
            collection,
            EconomyTrigger(model, cost_model),
            cost_model,
            grids=grids,
        )
        if best is None or cost < best[0]:
            best = (cost, K, model)
    return best[1], best[2]


def tune_economy(
    collection,
    validation_series: Sequence,
    estimation_series: Sequence,
    cost_model: CostModel,
    k_grid: Sequence[int],
) -> tuple[int, EconomyModel]:
    """Fit per K on the estimation split, select K on the validation split."""
    models = fit_economy_models(collection, estimation_series, k_grid)
    return select_economy(models, collection, validation_series, cost_model)


# ---------------------------------------------------------------------------
# serialization (stored alongside the classifier collection artifact)
# ---------------------------------------------------------------------------

def economy_to_dict(model: EconomyModel) -> dict:
    return {
        "K": model.K,
        "boundaries": {str(k): v.tolist() for k, v in model.boundaries.items()},
        "transitions": {str(k): v.tolist() for k, v in model.transitions.items()},
        "priors": {str(k): v.tolist() for k, v in model.priors.items()},
        "confusions": {str(k): v.tolist() for k, v in model.confusions.items()},
    }


def economy_from_dict(d: dict, horizon_range: HorizonRange) -> EconomyModel:
    return EconomyModel(
        K=int(d["K"]),
        horizon_range=horizon_range,
        boundaries={int(k): np.asarray(v) for k, v in d["boundaries"].items()},
        transitions={int(k): np.asarray(v) for k, v in d["transitions"].items()},
        priors={int(k): np.asarray(v) for k, v in d["priors"].items()},
        confusions={int(k): np.asarray(v) for k, v in d["confusions"].items()},
    )
