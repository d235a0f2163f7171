"""End-to-end pipelines behind the CLI subcommands.

Every command echoes its effective configuration (plus a hash and the
tuned parameters, where applicable) into a manifest, and all outputs are
deterministic for a fixed seed: re-running a command rewrites byte
identical files.
"""
from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from types import SimpleNamespace
from typing import Optional

import numpy as np

from . import __version__
from .charts import line_chart
from .classifiers import (
    auc,
    load_collection,
    save_collection,
    tune_and_train_collection,
)
from .config import RunConfig, config_from_dict
from .core import CostModel, DataError, ValidationError
from .data import (
    SPLIT_NAMES,
    build_horizon_datasets,
    generate_synthetic,
    load_pdm_csv,
    load_series_csv,
    save_series_csv,
    split_series,
)
from .economy import (
    EconomyTrigger,
    economy_to_dict,
    fit_economy_models,
    select_economy,
)
from .streaming import (
    avg_cost_dataset,
    avg_cost_series,
    build_grids,
    run_stream,
    write_decision_log,
)
from .triggers import CCTrigger, EarlyTrigger, LateTrigger, SRTrigger, tune_cc, tune_sr

RESULT_HEADER = ["method", "alpha", "cm_id", "avg_cost", "mean_horizon", "forced_frac", "params"]


def _write_manifest(cfg: RunConfig, command: str, extra: Optional[dict] = None) -> Path:
    doc = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "config_sha256": cfg.sha256(),
    }
    if extra:
        doc.update(extra)
    path = Path(cfg.out) / f"manifest_{command}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _write_splits(cfg: RunConfig, series_list) -> dict:
    split = split_series(series_list, cfg.seed)
    sizes = {}
    for name in SPLIT_NAMES:
        part = getattr(split, name)
        save_series_csv(part, cfg.data_dir() / f"{name}.csv")
        sizes[name] = len(part)
    return sizes


def _load_split(cfg: RunConfig, name: str):
    path = cfg.data_dir() / f"{name}.csv"
    if not path.exists():
        raise DataError(f"missing split file {path}; run generate or ingest first")
    return load_series_csv(path)


# ---------------------------------------------------------------------------
# generate / ingest
# ---------------------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> Path:
    if cfg.synthetic is None:
        raise ValidationError("generate needs a data.synthetic config section")
    gen = cfg.generator_config()
    if gen.num_series < 4:
        raise ValidationError(
            f"num_series must be >= 4 to populate all splits, got {gen.num_series}"
        )
    series = generate_synthetic(gen)
    sizes = _write_splits(cfg, series)
    return _write_manifest(cfg, "generate", {"split_sizes": sizes})


def cmd_ingest(cfg: RunConfig) -> Path:
    if not cfg.pdm_paths:
        raise ValidationError("ingest needs a data.pdm config section or path flags")
    series = load_pdm_csv(
        cfg.pdm_paths["telemetry"], cfg.pdm_paths["errors"], cfg.pdm_paths["failures"]
    )
    if len(series) < 4:
        raise DataError(f"ingest found only {len(series)} series; need at least 4")
    totals = {
        "n_series": len(series),
        "n_timestamps": int(sum(s.length for s in series)),
        "n_error_flags": int(sum(s.errors.sum() for s in series)),
        "n_failure_timestamps": int(sum(s.labels.sum() for s in series)),
    }
    sizes = _write_splits(cfg, series)
    return _write_manifest(cfg, "ingest", {"split_sizes": sizes, "totals": totals})


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(cfg: RunConfig) -> Path:
    hr = cfg.horizon_range
    train = _load_split(cfg, "train")
    validation = _load_split(cfg, "validation")
    datasets = build_horizon_datasets(train, hr)
    if len(datasets[hr.eta_min]) == 0:
        raise DataError("train split yields no targets; series too short for the horizon range")

    tuning_cm_id, tuning_cm = cfg.cost_matrices[0]
    cost_model = CostModel(cm=np.asarray(tuning_cm), alpha=cfg.alphas[0], horizon_range=hr)
    collection = tune_and_train_collection(datasets, hr, cost_model, cfg.lambda_grid)
    collection.metadata.update(
        {
            "seed": cfg.seed,
            "config_sha256": cfg.sha256(),
            "tuning_cost_matrix": tuning_cm_id,
            "n_train_targets": len(datasets[hr.eta_min]),
        }
    )
    save_collection(collection, cfg.model_path())

    val_datasets = build_horizon_datasets(validation, hr)
    profile_path = Path(cfg.out) / "auc_profile.csv"
    with open(profile_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eta", "auc"])
        for eta in hr.horizons():
            ds = val_datasets[eta]
            try:
                scores = collection.classifier(eta).predict_proba_batch(ds.features)
                value = repr(auc(scores, ds.labels))
            except ValidationError:
                value = ""  # single-class horizon: AUC undefined, left blank
            writer.writerow([eta, value])
    return _write_manifest(cfg, "train", {"model": str(cfg.model_path())})


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _load_state(cfg: RunConfig) -> SimpleNamespace:
    collection, _doc = load_collection(cfg.model_path())
    if collection.horizon_range != cfg.horizon_range:
        raise ValidationError(
            "model artifact horizon range does not match the config; retrain first"
        )
    validation = _load_split(cfg, "validation")
    estimation = _load_split(cfg, "estimation")
    test = _load_split(cfg, "test")
    state = SimpleNamespace(
        cfg=cfg,
        collection=collection,
        validation=validation,
        test=test,
        grids_val=build_grids(validation, collection),
        grids_test=build_grids(test, collection),
        economy_models=None,
    )
    if "economy" in cfg.methods:
        state.economy_models = fit_economy_models(collection, estimation, cfg.k_grid)
    return state


def _tuned_trigger(state: SimpleNamespace, method: str, cost_model: CostModel):
    cfg = state.cfg
    if method == "early":
        return EarlyTrigger(), {}
    if method == "late":
        return LateTrigger(), {}
    if method == "cc":
        params = tune_cc(
            state.collection, state.validation, cost_model,
            theta_grid=cfg.theta_grid, grids=state.grids_val,
        )
        return CCTrigger(params), {"threshold": params.threshold}
    if method == "sr":
        grid = list(itertools.product(cfg.gamma_values, repeat=3))
        params = tune_sr(
            state.collection, state.validation, cost_model,
            gamma_grid=grid, grids=state.grids_val,
        )
        return SRTrigger(params), {
            "gamma1": params.gamma1, "gamma2": params.gamma2, "gamma3": params.gamma3
        }
    if method == "economy":
        k, model = select_economy(
            state.economy_models, state.collection, state.validation,
            cost_model, grids=state.grids_val,
        )
        return EconomyTrigger(model, cost_model), {"K": k}
    raise ValidationError(f"unknown method {method!r}")


def _alpha_label(alpha: float) -> str:
    return f"{alpha:g}"


def _log_path(cfg: RunConfig, method: str, cm_id: str, alpha: float) -> Path:
    return Path(cfg.out) / "logs" / f"{method}__{cm_id}__alpha{_alpha_label(alpha)}.csv"


def _run_cell(state: SimpleNamespace, method: str, alpha: float, cm_id: str, cm) -> dict:
    cfg = state.cfg
    cost_model = CostModel(
        cm=np.asarray(cm, dtype=float), alpha=alpha, horizon_range=cfg.horizon_range
    )
    trigger, params = _tuned_trigger(state, method, cost_model)

    per_series_costs, runs = [], []
    etas, forced = [], []
    for series in state.test:
        records = run_stream(
            series, state.collection, trigger, cost_model,
            grid=state.grids_test[series.series_id],
        )
        runs.append((series.series_id, records))
        per_series_costs.append(avg_cost_series(records, series.length, cost_model))
        etas.extend(r.eta for r in records)
        forced.extend(r.forced for r in records)

    write_decision_log(_log_path(cfg, method, cm_id, alpha), runs)
    row = {
        "method": method,
        "alpha": alpha,
        "cm_id": cm_id,
        "avg_cost": avg_cost_dataset(per_series_costs),
        "mean_horizon": float(np.mean(etas)),
        "forced_frac": float(np.mean(forced)),
        "params": json.dumps(params, sort_keys=True),
    }
    if method == "economy":
        row["_economy_payload"] = (
            f"K={params['K']},alpha={_alpha_label(alpha)},cm={cm_id}",
            economy_to_dict(state.economy_models[params["K"]]),
        )
    return row


_WORKER_STATE: Optional[SimpleNamespace] = None


def _init_worker(cfg_doc: dict) -> None:
    global _WORKER_STATE
    _WORKER_STATE = _load_state(config_from_dict(cfg_doc))


def _worker_cell(spec) -> dict:
    method, alpha, cm_id, cm = spec
    return _run_cell(_WORKER_STATE, method, alpha, cm_id, cm)


def cmd_sweep(cfg: RunConfig, jobs: int = 1) -> Path:
    cells = [
        (method, alpha, cm_id, cm)
        for cm_id, cm in cfg.cost_matrices
        for alpha in cfg.alphas
        for method in cfg.methods
    ]
    if jobs > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(cfg.to_dict(),)
        ) as pool:
            rows = list(pool.map(_worker_cell, cells))
    else:
        state = _load_state(cfg)
        rows = [_run_cell(state, *cell) for cell in cells]

    rows.sort(key=lambda r: (r["cm_id"], r["alpha"], r["method"]))
    results_path = Path(cfg.out) / "results.csv"
    economy_payloads = {}
    tuned = {}
    with open(results_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_HEADER)
        for row in rows:
            payload = row.pop("_economy_payload", None)
            if payload:
                economy_payloads[payload[0]] = payload[1]
            writer.writerow(
                [
                    row["method"],
                    repr(row["alpha"]),
                    row["cm_id"],
                    repr(row["avg_cost"]),
                    repr(row["mean_horizon"]),
                    repr(row["forced_frac"]),
                    row["params"],
                ]
            )
            tuned[f"{row['method']}|{row['cm_id']}|alpha={_alpha_label(row['alpha'])}"] = json.loads(
                row["params"]
            )

    if economy_payloads:
        collection, _doc = load_collection(cfg.model_path())
        save_collection(
            collection,
            Path(cfg.out) / "model_with_economy.json",
            extras={"economy_models": dict(sorted(economy_payloads.items()))},
        )
    return _write_manifest(cfg, "sweep", {"tuned": tuned, "results": str(results_path)})


def read_results(path) -> list[dict]:
    if not Path(path).exists():
        raise DataError(f"missing results file {path}; run sweep first")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULT_HEADER:
            raise DataError(f"{path}: unexpected results header {header!r}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            try:
                rows.append(
                    {
                        "method": raw[0],
                        "alpha": float(raw[1]),
                        "cm_id": raw[2],
                        "avg_cost": float(raw[3]),
                        "mean_horizon": float(raw[4]),
                        "forced_frac": float(raw[5]),
                        "params": raw[6],
                    }
                )
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return rows


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _write_table(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_table(path: Path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def cmd_report(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    results = read_results(out / "results.csv")
    if not results:
        raise ValidationError("results.csv is empty; nothing to report")
    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    by_key = {(r["method"], r["alpha"], r["cm_id"]): r for r in results}
    methods = [m for m in cfg.methods if any(r["method"] == m for r in results)]
    alphas = sorted({r["alpha"] for r in results})
    cm_ids = [cid for cid, _m in cfg.cost_matrices if any(r["cm_id"] == cid for r in results)]
    gaps = []

    for cm_id in cm_ids:
        table_path = report_dir / f"cost_curve_{cm_id}.csv"
        rows = []
        for alpha in alphas:
            row = [repr(alpha)]
            for method in methods:
                r = by_key.get((method, alpha, cm_id))
                if r is None:
                    gaps.append(f"cost_curve_{cm_id}: no row for method={method} alpha={alpha:g}")
                    row.append("")
                else:
                    row.append(repr(r["avg_cost"]))
            rows.append(row)
        _write_table(table_path, ["alpha"] + methods, rows)
        header, raw = _read_table(table_path)
        series = []
        for j, method in enumerate(header[1:], start=1):
            pts = [(float(r[0]), float(r[j])) for r in raw if r[j] != ""]
            series.append((method, pts))
        svg = line_chart(
            series,
            title=f"Average cost vs delay slope ({cm_id})",
            x_label="alpha (log scale)",
            y_label="average cost",
            log_x=all(a > 0 for a in alphas),
        )
        (report_dir / f"cost_curve_{cm_id}.svg").write_text(svg)

    for cm_id in cm_ids:
        for alpha in cfg.histogram_alphas:
            if alpha not in alphas:
                gaps.append(f"horizon_hist_{cm_id}: alpha={alpha:g} not in results")
                continue
            from .streaming import horizon_histogram, read_decision_log

            hists = {}
            for method in methods:
                log_path = _log_path(cfg, method, cm_id, alpha)
                if not log_path.exists():
                    gaps.append(f"horizon_hist_{cm_id}_alpha{alpha:g}: missing log for {method}")
                    continue
                records = [r for recs in read_decision_log(log_path).values() for r in recs]
                hists[method] = horizon_histogram(records)
            if not hists:
                continue
            etas = sorted({eta for h in hists.values() for eta in h})
            name = f"horizon_hist_{cm_id}_alpha{_alpha_label(alpha)}"
            rows = [
                [eta] + [hists[m].get(eta, 0) if m in hists else "" for m in methods]
                for eta in etas
            ]
            _write_table(report_dir / f"{name}.csv", ["eta"] + methods, rows)
            header, raw = _read_table(report_dir / f"{name}.csv")
            series = []
            for j, method in enumerate(header[1:], start=1):
                pts = [(float(r[0]), float(r[j])) for r in raw if r[j] != ""]
                if pts:
                    series.append((method, pts))
            svg = line_chart(
                series,
                title=f"Decision horizon distribution ({cm_id}, alpha={alpha:g})",
                x_label="decision horizon",
                y_label="decisions",
            )
            (report_dir / f"{name}.svg").write_text(svg)

    profile_path = out / "auc_profile.csv"
    if profile_path.exists():
        header, raw = _read_table(profile_path)
        pts = [(float(r[0]), float(r[1])) for r in raw if r[1] != ""]
        svg = line_chart(
            [("AUC", pts)],
            title="Ranking quality by horizon",
            x_label="horizon",
            y_label="AUC",
        )
        (report_dir / "auc_profile.svg").write_text(svg)
    else:
        gaps.append("auc_profile: auc_profile.csv not found (run train)")

    gaps_path = report_dir / "gaps.txt"
    if gaps:
        gaps_path.write_text("\n".join(gaps) + "\n")
    elif gaps_path.exists():
        gaps_path.unlink()
    return _write_manifest(cfg, "report", {"gaps": gaps})
