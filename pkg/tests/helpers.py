"""Shared test scaffolding: hand-built classifiers and tiny series."""
import numpy as np

from earlystream import HorizonRange, OpenTimeSeries
from earlystream.classifiers import ClassifierCollection, ConstantClassifier


class FnClassifier:
    """Posterior given by an arbitrary function of the feature matrix."""

    def __init__(self, fn):
        self.fn = fn

    def predict_proba_batch(self, F):
        F = np.atleast_2d(np.asarray(F, dtype=np.float64))
        return np.asarray(self.fn(F), dtype=np.float64)

    def predict_proba(self, F):
        return float(self.predict_proba_batch(F)[0])


def fn_collection(hr: HorizonRange, fn=None, per_eta=None) -> ClassifierCollection:
    """Collection from one shared function or a per-horizon mapping."""
    if per_eta is None:
        per_eta = {eta: FnClassifier(fn) for eta in hr.horizons()}
    return ClassifierCollection(
        horizon_range=hr, feature_layout=("f",) , classifiers=dict(per_eta)
    )


def constant_collection(hr: HorizonRange, rate: float) -> ClassifierCollection:
    return ClassifierCollection(
        horizon_range=hr,
        feature_layout=("f",),
        classifiers={eta: ConstantClassifier(rate) for eta in hr.horizons()},
    )


def sigmoid_mean_collection(hr: HorizonRange) -> ClassifierCollection:
    """A smooth, input-sensitive posterior for equivalence/fuzz tests."""

    def fn(F):
        return 1.0 / (1.0 + np.exp(-F.mean(axis=1)))

    return fn_collection(hr, fn=fn)


def random_series(seed, T=80, p=2, e=1, series_id=None, pos_frac=0.25):
    rng = np.random.default_rng(seed)
    return OpenTimeSeries(
        series_id=series_id or f"r{seed}",
        telemetry=rng.standard_normal((T, p)),
        errors=rng.random((T, e)) < 0.1,
        labels=(rng.random(T) < pos_frac).astype(int),
    )
