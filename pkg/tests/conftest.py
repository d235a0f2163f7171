import numpy as np
import pytest

from earlystream import GeneratorConfig, HorizonRange, generate_synthetic


@pytest.fixture(scope="session")
def tiny_horizon_range():
    return HorizonRange(eta_min=-3, eta_max=8, window=4)


@pytest.fixture(scope="session")
def tiny_series_set(tiny_horizon_range):
    cfg = GeneratorConfig(
        seed=11,
        num_series=8,
        length=300,
        num_telemetry=2,
        num_error_types=1,
        failure_rate=6.0,
        premise_lag_low=3,
        premise_lag_high=6,
        premise_fire_prob=0.9,
        noise_error_rate=0.02,
        telemetry_drift_amplitude=2.5,
    )
    return generate_synthetic(cfg)


def random_series(rng, series_id="r0", T=60, p=2, e=1, pos_frac=0.2):
    labels = (rng.random(T) < pos_frac).astype(int)
    return dict(
        series_id=series_id,
        telemetry=rng.standard_normal((T, p)),
        errors=rng.random((T, e)) < 0.1,
        labels=labels,
    )
