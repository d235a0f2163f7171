"""Per-horizon probabilistic classifiers and ranking diagnostics.

The reference model is class-weighted, L2-regularized logistic regression
on standardized window features, fit by full-batch gradient descent with
backtracking line search from a zero initialization — deterministic by
construction.  Anything exposing ``predict_proba`` /
``predict_proba_batch`` can stand in for it behind the same collection
interface.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from .core import CostModel, DataError, HorizonRange, ValidationError
from .data import HorizonDataset, feature_names

GRAD_TOL = 1e-8
MAX_ITER = 10_000


@runtime_checkable
class ProbClassifier(Protocol):
    """Posterior estimator for the failure class on window features."""

    def predict_proba(self, features: np.ndarray) -> float:
        ...

    def predict_proba_batch(self, features: np.ndarray) -> np.ndarray:
        ...


def _sigmoid(z):
    # overflow-safe split: exp only ever sees non-positive arguments
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _loss_and_grad(params, Z, y, sample_w, lam):
    """Weighted-mean logistic loss with an L2 penalty on the weights only."""
    w, b = params[:-1], params[-1]
    z = Z @ w + b
    # log(1 + exp(-z)) for y=1 and log(1 + exp(z)) for y=0, computed stably
    losses = np.logaddexp(0.0, z) - y * z
    S = sample_w.sum()
    loss = float((sample_w * losses).sum() / S + 0.5 * lam * (w @ w))
    resid = sample_w * (_sigmoid(z) - y)
    grad = np.empty_like(params)
    grad[:-1] = Z.T @ resid / S + lam * w
    grad[-1] = resid.sum() / S
    return loss, grad


@dataclass
class ReferenceClassifier:
    """Class-weighted L2 logistic regression over standardized features."""

    mean: np.ndarray
    std: np.ndarray
    weights: np.ndarray
    intercept: float
    lam: float
    rho: float
    n_iter: int = 0

    def _standardize(self, F: np.ndarray) -> np.ndarray:
        safe = np.where(self.std > 0, self.std, 1.0)
        Z = (F - self.mean) / safe
        if (self.std == 0).any():
            Z[:, self.std == 0] = 0.0  # degenerate features carry no signal
        return Z

    def predict_proba_batch(self, features: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return _sigmoid(self._standardize(F) @ self.weights + self.intercept)

    def predict_proba(self, features: np.ndarray) -> float:
        return float(self.predict_proba_batch(features)[0])

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "lam": self.lam,
            "rho": self.rho,
            "n_iter": self.n_iter,
        }


@dataclass
class ConstantClassifier:
    """Fallback for single-class horizons: a fixed smoothed base rate."""

    rate: float

    def predict_proba_batch(self, features: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(np.asarray(features))
        return np.full(F.shape[0], self.rate, dtype=np.float64)

    def predict_proba(self, features: np.ndarray) -> float:
        return self.rate

    def to_dict(self) -> dict:
        return {"kind": "constant", "rate": self.rate}


def classifier_from_dict(d: dict):
    if d["kind"] == "constant":
        return ConstantClassifier(rate=float(d["rate"]))
    if d["kind"] == "logistic":
        return ReferenceClassifier(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            weights=np.asarray(d["weights"], dtype=np.float64),
            intercept=float(d["intercept"]),
            lam=float(d["lam"]),
            rho=float(d["rho"]),
            n_iter=int(d["n_iter"]),
        )
    raise ValidationError(f"unknown classifier kind {d.get('kind')!r}")


def train_reference(
    dataset: HorizonDataset, lam: float, rho: float
) -> ReferenceClassifier:
    """Fit the reference classifier on one horizon's examples.

    Positive examples carry weight ``rho``.  Gradient descent runs from a
    zero start with backtracking line search until the gradient infinity
    norm drops to ``GRAD_TOL`` or ``MAX_ITER`` iterations.
    """
    if len(dataset) == 0:
        raise ValidationError(f"horizon {dataset.eta}: empty training dataset")
    y = dataset.labels.astype(np.float64)
    n_pos = int(dataset.labels.sum())
    if n_pos == 0 or n_pos == len(dataset):
        raise ValidationError(
            f"horizon {dataset.eta}: single-class dataset (positives={n_pos})"
        )
    if rho <= 0:
        raise ValidationError(f"rho must be > 0, got {rho}")

    F = dataset.features
    mean = F.mean(axis=0)
    std = F.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    Z = (F - mean) / safe
    Z[:, std == 0] = 0.0

    sample_w = np.where(y == 1.0, float(rho), 1.0)
    params = np.zeros(F.shape[1] + 1)
    loss, grad = _loss_and_grad(params, Z, y, sample_w, lam)
    step = 1.0
    n_iter = 0
    for n_iter in range(1, MAX_ITER + 1):
        if np.max(np.abs(grad)) <= GRAD_TOL:
            n_iter -= 1
            break
        g2 = float(grad @ grad)
        step = min(step * 2.0, 1e4)  # retry larger steps, then backtrack
        while True:
            candidate = params - step * grad
            new_loss, new_grad = _loss_and_grad(candidate, Z, y, sample_w, lam)
            if new_loss <= loss - 1e-4 * step * g2 or step < 1e-18:
                break
            step *= 0.5
        params, loss, grad = candidate, new_loss, new_grad

    return ReferenceClassifier(
        mean=mean,
        std=std,
        weights=params[:-1],
        intercept=float(params[-1]),
        lam=float(lam),
        rho=float(rho),
        n_iter=n_iter,
    )


def _fit_any(dataset: HorizonDataset, lam: float, rho_policy) -> object:
    """Reference fit, or the smoothed-base-rate constant on single-class data."""
    n = len(dataset)
    n_pos = int(dataset.labels.sum())
    if n == 0 or n_pos == 0 or n_pos == n:
        return ConstantClassifier(rate=(n_pos + 1.0) / (n + 2.0))
    rho = rho_policy(n_pos, n - n_pos)
    return train_reference(dataset, lam=lam, rho=rho)


def _holdout_indices(n: int) -> np.ndarray:
    # deterministic 20% holdout: every fifth example in target order
    return np.arange(n) % 5 == 4


def default_rho(n_pos: int, n_neg: int) -> float:
    """Positive-class weight: #negatives over #positives (upweights positives)."""
    return n_neg / n_pos


@dataclass
class ClassifierCollection:
    """One trained classifier per horizon, sharing a window width and feature layout."""

    horizon_range: HorizonRange
    feature_layout: tuple
    classifiers: dict  # eta -> ProbClassifier
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [
            eta for eta in self.horizon_range.horizons() if eta not in self.classifiers
        ]
        if missing:
            raise ValidationError(f"collection missing horizons {missing}")

    @property
    def window(self) -> int:
        return self.horizon_range.window

    def classifier(self, eta: int):
        self.horizon_range.require(eta)
        return self.classifiers[eta]


def tune_and_train_collection(
    train_datasets: dict[int, HorizonDataset],
    horizon_range: HorizonRange,
    cost_model: CostModel,
    lambda_grid: Sequence[float],
    rho_policy: Optional[Callable[[int, int], float]] = None,
) -> ClassifierCollection:
    """Per horizon: pick lambda by held-out misclassification cost, then refit on everything.

    The holdout is the last-of-every-five examples in target order (20%);
    candidate lambdas are scored by the summed ``cm[y_hat][y]`` at threshold
    0.5 and ties keep the earliest grid entry.  ``rho`` is recomputed from
    whatever subset is being fit.
    """
    if not lambda_grid:
        raise ValidationError("lambda_grid must be nonempty")
    rho_policy = rho_policy or default_rho
    cm = cost_model.cm

    chosen = {}
    classifiers = {}
    for eta in horizon_range.horizons():
        dataset = train_datasets.get(eta)
        if dataset is None:
            raise ValidationError(f"no training dataset for horizon {eta}")
        if len(lambda_grid) == 1:
            best_lam = float(lambda_grid[0])
        else:
            hold = _holdout_indices(len(dataset))
            fit_ds = HorizonDataset(
                eta=eta,
                target_ids=tuple(
                    t for t, h in zip(dataset.target_ids, hold) if not h
                ),
                features=dataset.features[~hold],
                labels=dataset.labels[~hold],
            )
            ho_feats = dataset.features[hold]
            ho_labels = dataset.labels[hold]
            best_lam, best_cost = None, None
            for lam in lambda_grid:
                model = _fit_any(fit_ds, float(lam), rho_policy)
                y_hat = (model.predict_proba_batch(ho_feats) > 0.5).astype(np.int8)
                cost = float(cm[y_hat, ho_labels].sum())
                if best_cost is None or cost < best_cost:
                    best_lam, best_cost = float(lam), cost
        classifiers[eta] = _fit_any(dataset, best_lam, rho_policy)
        chosen[eta] = best_lam

    d = train_datasets[horizon_range.eta_min].features.shape[1]
    e = d % 4
    return ClassifierCollection(
        horizon_range=horizon_range,
        feature_layout=tuple(feature_names((d - e) // 4, e)),
        classifiers=classifiers,
        metadata={"lambda_by_horizon": chosen},
    )


# ---------------------------------------------------------------------------
# ranking diagnostics
# ---------------------------------------------------------------------------

def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outscores a random negative, ties count 1/2."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("auc needs both classes present")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    u = ranks[y == 1].sum() - 0.5 * n_pos * (n_pos + 1)
    return float(u / (n_pos * n_neg))


def auc_profile(
    collection: ClassifierCollection, eval_datasets: dict[int, HorizonDataset]
) -> dict[int, float]:
    """AUC of each horizon's classifier on that horizon's evaluation examples."""
    out = {}
    for eta in collection.horizon_range.horizons():
        ds = eval_datasets.get(eta)
        if ds is None:
            raise ValidationError(f"no evaluation dataset for horizon {eta}")
        scores = collection.classifier(eta).predict_proba_batch(ds.features)
        out[eta] = auc(scores, ds.labels)
    return out


# ---------------------------------------------------------------------------
# model artifact
# ---------------------------------------------------------------------------

def save_collection(
    collection: ClassifierCollection, path, extras: Optional[dict] = None
) -> None:
    """Write the collection (plus optional extra sections) as a JSON artifact."""
    hr = collection.horizon_range
    doc = {
        "format": "earlystream-model",
        "version": 1,
        "horizon_range": {
            "eta_min": hr.eta_min,
            "eta_max": hr.eta_max,
            "window": hr.window,
        },
        "feature_layout": list(collection.feature_layout),
        "classifiers": {
            str(eta): collection.classifiers[eta].to_dict() for eta in hr.horizons()
        },
        "metadata": collection.metadata,
    }
    if extras:
        doc.update(extras)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_collection(path) -> tuple[ClassifierCollection, dict]:
    """Read a model artifact; returns the collection and the full document."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing model artifact {path}; run train first")
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "earlystream-model":
        raise ValidationError(f"{path}: not a model artifact")
    hr = HorizonRange(**doc["horizon_range"])
    classifiers = {
        int(eta): classifier_from_dict(d) for eta, d in doc["classifiers"].items()
    }
    collection = ClassifierCollection(
        horizon_range=hr,
        feature_layout=tuple(doc["feature_layout"]),
        classifiers=classifiers,
        metadata=doc.get("metadata", {}),
    )
    return collection, doc
