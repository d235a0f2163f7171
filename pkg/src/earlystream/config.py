"""Harness configuration: defaults, YAML loading, validation.

Cost matrices are written row-major as ``[[TN, FN], [FP, TP]]`` and
indexed ``cm[predicted][actual]`` — bit-for-bit the convention of
:mod:`earlystream.core`.  The default alpha grid reads the engineering
notation 10e-04 .. 10e+03 as {0.001, 0.01, 0.1, 1, 10, 100, 1000}.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .core import HorizonRange, ValidationError
from .data import GeneratorConfig

METHODS = ("early", "late", "cc", "sr", "economy")

DEFAULT_ALPHAS = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)
DEFAULT_COST_MATRICES = (
    ("cm1", ((0.0, 1.0), (1.0, 0.0))),
    ("cm2", ((0.0, 10.0), (1.0, 0.0))),
    ("cm3", ((0.0, 100.0), (1.0, 0.0))),
    ("cm4", ((0.0, 1000.0), (1.0, 0.0))),
)
DEFAULT_GAMMA_VALUES = (-1.0, -0.5, 0.0, 0.5, 1.0)
DEFAULT_THETA_GRID = tuple(i / 20 for i in range(21))
DEFAULT_K_GRID = (1, 2, 3, 4, 5)
DEFAULT_LAMBDA_GRID = (0.01, 0.1, 1.0)

DEFAULT_SYNTHETIC = dict(
    num_series=120,
    length=2000,
    num_telemetry=3,
    num_error_types=2,
    failure_rate=8.0,
    premise_lag_low=15,
    premise_lag_high=40,
    premise_fire_prob=0.85,
    noise_error_rate=0.05,
    telemetry_drift_amplitude=2.5,
)


@dataclass
class RunConfig:
    seed: int = 7
    out: Path = Path("runs/demo")
    horizon_range: HorizonRange = field(
        default_factory=lambda: HorizonRange(eta_min=-10, eta_max=50, window=10)
    )
    alphas: tuple = DEFAULT_ALPHAS
    cost_matrices: tuple = DEFAULT_COST_MATRICES  # ((id, 2x2 rows), ...)
    methods: tuple = METHODS
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    theta_grid: tuple = DEFAULT_THETA_GRID
    gamma_values: tuple = DEFAULT_GAMMA_VALUES
    k_grid: tuple = DEFAULT_K_GRID
    synthetic: Optional[dict] = field(default_factory=lambda: dict(DEFAULT_SYNTHETIC))
    pdm_paths: Optional[dict] = None  # telemetry/errors/failures
    histogram_alphas: tuple = (0.001, 0.1)

    def validate(self) -> None:
        if len(set(self.alphas)) != len(self.alphas):
            raise ValidationError("duplicate alpha values in config")
        if any(a < 0 for a in self.alphas) or not self.alphas:
            raise ValidationError("alphas must be a nonempty list of nonnegative reals")
        ids = [cid for cid, _m in self.cost_matrices]
        if len(set(ids)) != len(ids) or not ids:
            raise ValidationError("cost matrix ids must be nonempty and unique")
        for cid, m in self.cost_matrices:
            arr = np.asarray(m, dtype=float)
            if arr.shape != (2, 2) or (arr < 0).any():
                raise ValidationError(f"cost matrix {cid!r} must be 2x2 nonnegative")
        for method in self.methods:
            if method not in METHODS:
                raise ValidationError(
                    f"unknown method {method!r}; expected subset of {METHODS}"
                )
        if not self.methods:
            raise ValidationError("methods must be nonempty")
        for name, grid in (
            ("lambda", self.lambda_grid),
            ("theta", self.theta_grid),
            ("gamma", self.gamma_values),
            ("k", self.k_grid),
        ):
            if not grid:
                raise ValidationError(f"grid {name!r} must be nonempty")
        if self.synthetic is not None:
            gen = self.generator_config()
            if gen.length <= self.horizon_range.window + self.horizon_range.eta_max:
                raise ValidationError(
                    "synthetic length must exceed window + eta_max"
                )

    def generator_config(self) -> GeneratorConfig:
        if self.synthetic is None:
            raise ValidationError("config has no synthetic data section")
        return GeneratorConfig(seed=self.seed, **self.synthetic)

    def data_dir(self) -> Path:
        return Path(self.out) / "data"

    def model_path(self) -> Path:
        return Path(self.out) / "model.json"

    def to_dict(self) -> dict:
        hr = self.horizon_range
        return {
            "seed": self.seed,
            "out": str(self.out),
            "horizon": {"window": hr.window, "eta_min": hr.eta_min, "eta_max": hr.eta_max},
            "alphas": list(self.alphas),
            "cost_matrices": [
                {"id": cid, "matrix": [list(r) for r in m]}
                for cid, m in self.cost_matrices
            ],
            "methods": list(self.methods),
            "grids": {
                "lambda": list(self.lambda_grid),
                "theta": list(self.theta_grid),
                "gamma": list(self.gamma_values),
                "k": list(self.k_grid),
            },
            "data": {"synthetic": dict(self.synthetic)} if self.synthetic else (
                {"pdm": dict(self.pdm_paths)} if self.pdm_paths else {}
            ),
            "report": {"histogram_alphas": list(self.histogram_alphas)},
        }

    def sha256(self) -> str:
        doc = self.to_dict()
        doc.pop("out", None)  # the same experiment may land anywhere on disk
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _require_keys(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) {sorted(unknown)} in {where}")


def config_from_dict(doc: dict) -> RunConfig:
    _require_keys(
        doc,
        {"seed", "out", "horizon", "alphas", "cost_matrices", "methods", "grids",
         "data", "report"},
        "config",
    )
    cfg = RunConfig()
    if "seed" in doc:
        cfg.seed = int(doc["seed"])
    if "out" in doc:
        cfg.out = Path(doc["out"])
    if "horizon" in doc:
        h = doc["horizon"]
        _require_keys(h, {"window", "eta_min", "eta_max"}, "horizon")
        cfg.horizon_range = HorizonRange(
            eta_min=int(h.get("eta_min", -10)),
            eta_max=int(h.get("eta_max", 50)),
            window=int(h.get("window", 10)),
        )
    if "alphas" in doc:
        cfg.alphas = tuple(float(a) for a in doc["alphas"])
    if "cost_matrices" in doc:
        mats = []
        for entry in doc["cost_matrices"]:
            _require_keys(entry, {"id", "matrix"}, "cost_matrices entry")
            mats.append(
                (str(entry["id"]), tuple(tuple(float(v) for v in r) for r in entry["matrix"]))
            )
        cfg.cost_matrices = tuple(mats)
    if "methods" in doc:
        cfg.methods = tuple(str(m) for m in doc["methods"])
    if "grids" in doc:
        g = doc["grids"]
        _require_keys(g, {"lambda", "theta", "gamma", "k"}, "grids")
        if "lambda" in g:
            cfg.lambda_grid = tuple(float(v) for v in g["lambda"])
        if "theta" in g:
            cfg.theta_grid = tuple(float(v) for v in g["theta"])
        if "gamma" in g:
            cfg.gamma_values = tuple(float(v) for v in g["gamma"])
        if "k" in g:
            cfg.k_grid = tuple(int(v) for v in g["k"])
    if "data" in doc:
        d = doc["data"]
        _require_keys(d, {"synthetic", "pdm"}, "data")
        if "synthetic" in d:
            syn = dict(d["synthetic"])
            _require_keys(syn, set(DEFAULT_SYNTHETIC), "data.synthetic")
            cfg.synthetic = {**DEFAULT_SYNTHETIC, **syn}
            cfg.pdm_paths = None
        elif "pdm" in d:
            pdm = dict(d["pdm"])
            _require_keys(pdm, {"telemetry", "errors", "failures"}, "data.pdm")
            cfg.pdm_paths = pdm
            cfg.synthetic = None
    if "report" in doc:
        r = doc["report"]
        _require_keys(r, {"histogram_alphas"}, "report")
        if "histogram_alphas" in r:
            cfg.histogram_alphas = tuple(float(a) for a in r["histogram_alphas"])
    cfg.validate()
    return cfg


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Config file plus command-line overrides; defaults mirror the benchmark."""
    doc = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValidationError(f"{path}: config must be a mapping")
        doc = loaded
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    return config_from_dict(doc)
