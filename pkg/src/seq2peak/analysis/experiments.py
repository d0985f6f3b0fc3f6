"""
Experiment harness: paradigm comparison, module ablation and alpha sweep.

Every experiment is a grid of independent cells (variant x horizon x seed).
Cells share the prepared data, train single-threaded, and may be farmed out to
a process pool; results are collected in grid order so metric files do not
depend on scheduling. Wall-clock times go to ``timings.json`` only.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..core.paradigms import Paradigm, build_pipeline
from ..core.windows import gen_synthetic, make_windows, split, standardize
from ..utils.checkpoint import load_checkpoint, save_checkpoint
from ..utils.data_loader import DATASETS, fetch_dataset, load_csv
from ..utils.validators import PERIOD, ConfigurationError, Seq2PeakError
from .summary import compare_to_baseline
from .training import evaluate, forecast_traces, train

logger = logging.getLogger(__name__)

ABLATION_ROWS = ("baseline", "+Decoder", "+CyclicNorm", "+Seq2Peak")
METRIC_COLUMNS = ("mse", "mae", "mse_raw", "mae_raw")


def load_series(dataset):
    """TimeSeriesFrame for a DatasetConfig, fetching registry datasets on first use."""
    if dataset.synthetic is not None:
        frame = gen_synthetic(dataset.synthetic_spec())
    elif dataset.csv is not None:
        frame = load_csv(dataset.csv, dataset.missing)
    else:
        if dataset.url is None and dataset.name not in DATASETS:
            raise ConfigurationError(
                f"Unknown dataset '{dataset.name}' and no url. Known: {sorted(DATASETS)}"
            )
        path = fetch_dataset(dataset.name, dataset.url, dataset.cache_dir, dataset.sha256)
        frame = load_csv(path, dataset.missing)

    if dataset.channels:
        frame = frame.select(dataset.channels)
    return frame


@dataclass
class PreparedData:
    """Raw series, its standardized splits and the training statistics."""

    raw: tuple
    splits: tuple
    stats: object

    @property
    def n_channels(self):
        return self.splits[0].n_channels

    @property
    def channel_names(self):
        return self.splits[0].channel_names

    def windows(self, part, input_hours, horizon_hours, stride=1):
        i = ("train", "val", "test").index(part)
        return make_windows(
            self.splits[i], input_hours, horizon_hours, stride=stride, raw_values=self.raw[i].values
        )


def prepare_data(config, frame=None):
    """
    Load, split and standardize the configured series.

    Each split must hold at least one window of the longest horizon.
    """
    frame = load_series(config.dataset) if frame is None else frame
    raw = split(frame, config.split, min_length=config.input_hours + config.horizon_hours)
    train_std, others, stats = standardize(raw[0], raw[1:])
    logger.info(
        "Prepared %d rows x %d channels (train/val/test = %d/%d/%d)",
        len(frame), frame.n_channels, *(len(r) for r in raw)
    )
    return PreparedData(raw, (train_std, *others), stats)


@dataclass(frozen=True)
class Cell:
    variant: str
    kind: str
    seed: int
    horizon: int
    alpha: float = None
    cyclicnorm: dict = None
    traces: bool = False


@dataclass
class CellResult:
    cell: Cell
    metrics: dict
    best_epoch: int = None
    epochs_run: int = None
    seconds: float = 0.0
    traces: pd.DataFrame = None
    error: str = None

    def row(self):
        c = self.cell
        return {
            "variant": c.variant,
            "paradigm": c.kind,
            "alpha": c.alpha,
            "cyclicnorm": c.cyclicnorm is not None,
            "horizon": c.horizon,
            "seed": c.seed,
            **self.metrics,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "error": self.error,
        }


def run_cell(data, config, cell):
    """Train one pipeline and score it on the test split. Errors are captured."""
    started = time.perf_counter()
    n_in, n_out = config.input_hours, cell.horizon * PERIOD
    try:
        train_w = data.windows("train", n_in, n_out, config.train.stride)
        val_w = data.windows("val", n_in, n_out)
        test_w = data.windows("test", n_in, n_out)
        pipeline = build_pipeline(
            cell.kind, n_in, n_out, data.n_channels,
            model=config.model, model_args=config.model_args,
            cyclicnorm=cell.cyclicnorm, alpha=cell.alpha, seed=cell.seed,
        )
        result = train(pipeline, train_w, val_w, replace(config.train, seed=cell.seed))
        report = evaluate(pipeline, test_w, [cell.horizon], data.stats, label=cell.variant)
        traces = forecast_traces(pipeline, test_w) if cell.traces else None
    except Seq2PeakError as e:
        logger.warning("%s (seed %d, %d days) failed: %s", cell.variant, cell.seed, cell.horizon, e)
        nan = {k: np.nan for k in METRIC_COLUMNS}
        return CellResult(cell, nan, seconds=time.perf_counter() - started, error=str(e))

    row = report.rows[0]
    metrics = {k: getattr(row, k) for k in METRIC_COLUMNS}
    return CellResult(
        cell, metrics, result.best_epoch, result.epochs_run,
        time.perf_counter() - started, traces,
    )


def run_cells(data, config, cells, jobs=1, progress=False):
    """Run cells serially or on ``jobs`` worker processes; results keep cell order."""
    cells = list(cells)
    bar = dict(total=len(cells), desc="  cells", disable=not progress)
    if jobs is None or jobs <= 1 or len(cells) <= 1:
        return [run_cell(data, config, c) for c in tqdm(cells, **bar)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = pool.map(run_cell, [data] * len(cells), [config] * len(cells), cells)
        return list(tqdm(futures, **bar))


def _alpha_for(kind, alpha):
    return (0.5 if alpha is None else alpha) if kind == Paradigm.SEQ2PEAK.value else None


def paradigm_cells(config):
    cn = config.cyclicnorm.as_kwargs()
    first_seed = config.seeds[0]
    longest = max(config.horizons)
    return [
        Cell(
            variant=kind, kind=kind, seed=seed, horizon=h,
            alpha=_alpha_for(kind, config.alpha),
            cyclicnorm=cn if kind == Paradigm.SEQ2PEAK.value else None,
            traces=seed == first_seed and h == longest,
        )
        for kind in config.paradigms for h in config.horizons for seed in config.seeds
    ]


def ablation_cells(config):
    cn = config.cyclicnorm.as_kwargs(enabled=True)
    alpha = _alpha_for(Paradigm.SEQ2PEAK.value, config.alpha)
    specs = {
        "baseline": ("sfs", None, None),
        "+Decoder": ("seq2peak", alpha, None),
        "+CyclicNorm": ("sfs", None, cn),
        "+Seq2Peak": ("seq2peak", alpha, cn),
    }
    return [
        Cell(variant=name, kind=kind, seed=seed, horizon=h, alpha=a, cyclicnorm=norm)
        for name, (kind, a, norm) in specs.items()
        for h in config.horizons for seed in config.seeds
    ]


def alpha_cells(config, alphas=None):
    alphas = tuple(config.alphas if alphas is None else alphas)
    if len(alphas) < 3:
        raise ConfigurationError(f"An alpha sweep needs at least 3 values, got {len(alphas)}")
    cn = config.cyclicnorm.as_kwargs()
    return [
        Cell(variant=f"alpha={a:g}", kind="seq2peak", seed=seed, horizon=config.horizons[0],
             alpha=float(a), cyclicnorm=cn)
        for a in alphas for seed in config.seeds
    ]


def preflight(config, cells, n_channels):
    """
    Build each distinct cell pipeline once without training it.

    Cells that cannot be built are logged and will fail again when run.

    Raises:
        Seq2PeakError: The first build error, when no cell can be built.
    """
    errors, built = [], 0
    seen = set()
    for cell in cells:
        key = (cell.kind, cell.horizon, cell.alpha, repr(cell.cyclicnorm))
        if key in seen:
            continue
        seen.add(key)
        try:
            build_pipeline(
                cell.kind, config.input_hours, cell.horizon * PERIOD, n_channels,
                model=config.model, model_args=config.model_args,
                cyclicnorm=cell.cyclicnorm, alpha=cell.alpha, seed=cell.seed,
            )
            built += 1
        except Seq2PeakError as e:
            logger.warning("%s (%d days) cannot be built: %s", cell.variant, cell.horizon, e)
            errors.append(e)
    if errors and not built:
        raise errors[0]


def results_frame(results):
    return pd.DataFrame([r.row() for r in results])


def summarize(rows, baseline):
    """
    Per-variant, per-horizon seed statistics against a baseline variant.

    Returns:
        DataFrame with variant, horizon, n, mean, std, sem, rel_improvement,
        wins, p_value and mean MAE columns, plus an 'Avg' horizon per variant
    """
    ok = rows[rows["error"].isna()]
    parts = []
    for h, group in ok.groupby("horizon", sort=True):
        table = compare_to_baseline(group, baseline, "mse") if baseline in set(group["variant"]) \
            else group.groupby("variant")["mse"].agg(["count", "mean", "std", "sem"]).rename(columns={"count": "n"})
        table["mae"] = group.groupby("variant")["mae"].mean()
        table["horizon"] = h
        parts.append(table.reset_index())
    if not parts:
        return pd.DataFrame()
    summary = pd.concat(parts, ignore_index=True)
    avg = summary.groupby("variant", sort=False)[["mean", "mae"]].mean().reset_index()
    avg["horizon"] = "Avg"
    return pd.concat([summary, avg], ignore_index=True)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not np.isfinite(obj) else float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(obj, path):
    Path(path).write_text(json.dumps(_clean(obj), indent=2) + "\n", encoding="utf-8")
    return path


def markdown_table(summary, dataset, model):
    """Human table: dataset x horizon x model x variant with mean MSE / MAE across seeds."""
    lines = ["| dataset | horizon | model | variant | MSE | MAE |", "|---|---|---|---|---|---|"]
    for _, r in summary.iterrows():
        lines.append(
            f"| {dataset} | {r['horizon']} | {model} | {r['variant']} "
            f"| {r['mean']:.4f} | {r['mae']:.4f} |"
        )
    return "\n".join(lines) + "\n"


def write_results(out_dir, name, results, baseline, config):
    """
    Write ``<name>_metrics.json``, ``<name>_metrics.md`` and ``<name>_timings.json``.

    Returns:
        (per-seed rows, summary) DataFrames
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = results_frame(results)
    summary = summarize(rows, baseline)
    write_json(
        {"experiment": name, "dataset": config.dataset.label, "model": config.model,
         "baseline": baseline,
         "rows": rows.to_dict(orient="records"),
         "summary": summary.to_dict(orient="records")},
        out_dir / f"{name}_metrics.json",
    )
    (out_dir / f"{name}_metrics.md").write_text(
        markdown_table(summary, config.dataset.label, config.model), encoding="utf-8"
    )
    write_json(
        {"total_seconds": sum(r.seconds for r in results),
         "cells": [{"variant": r.cell.variant, "horizon": r.cell.horizon,
                    "seed": r.cell.seed, "seconds": r.seconds} for r in results]},
        out_dir / f"{name}_timings.json",
    )
    return rows, summary


def run_paradigm_comparison(config, out_dir, data=None, jobs=1, progress=False):
    """
    Train every configured paradigm on shared data and seeds.

    A failing paradigm is recorded with its error; the others still run.
    Forecast traces of the first seed and longest horizon are written to
    ``traces_<paradigm>.csv``.
    """
    data = prepare_data(config) if data is None else data
    results = run_cells(data, config, paradigm_cells(config), jobs, progress)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    traces = {}
    for r in results:
        if r.traces is not None:
            r.traces.to_csv(out_dir / f"traces_{r.cell.kind}.csv", index=False)
            traces[r.cell.kind] = r.traces
    baseline = "sfs" if "sfs" in config.paradigms else config.paradigms[0]
    rows, summary = write_results(out_dir, "compare", results, baseline, config)
    return rows, summary, traces


def run_ablation(config, out_dir, data=None, jobs=1, progress=False):
    """Four-row module ablation: baseline, +Decoder, +CyclicNorm, +Seq2Peak."""
    data = prepare_data(config) if data is None else data
    results = run_cells(data, config, ablation_cells(config), jobs, progress)
    rows, summary = write_results(out_dir, "ablation", results, "baseline", config)
    return rows, summary


def run_alpha_sweep(config, out_dir, alphas=None, data=None, jobs=1, progress=False):
    """
    One seq2peak pipeline per alpha and seed on the first configured horizon.

    Writes ``alpha_sweep.csv`` (alpha, mse, mae; means over seeds).
    """
    data = prepare_data(config) if data is None else data
    results = run_cells(data, config, alpha_cells(config, alphas), jobs, progress)
    rows, summary = write_results(out_dir, "alpha_sweep", results, None, config)
    ok = rows[rows["error"].isna()]
    curve = ok.groupby("alpha", sort=True)[["mse", "mae"]].mean().reset_index()
    curve.to_csv(Path(out_dir) / "alpha_sweep.csv", index=False)
    return curve, rows


def build_from_config(config, n_channels, kind=None, seed=None):
    """Pipeline for the single-run ``train``/``eval`` commands."""
    kind = Paradigm.parse(kind or config.paradigm).value
    with_cn = kind in (Paradigm.SFS.value, Paradigm.SEQ2PEAK.value)
    return build_pipeline(
        kind, config.input_hours, config.horizon_hours, n_channels,
        model=config.model, model_args=config.model_args,
        cyclicnorm=config.cyclicnorm.as_kwargs() if with_cn else None,
        alpha=config.alpha, seed=config.train.seed if seed is None else seed,
    )


def train_single(config, out_dir, data=None, progress=False):
    """
    Train the configured paradigm once and evaluate on every horizon.

    Writes ``model.s2pk``, ``history.csv`` and ``metrics.json``.
    """
    data = prepare_data(config) if data is None else data
    pipeline = build_from_config(config, data.n_channels)
    n_in, n_out = config.input_hours, config.horizon_hours
    result = train(
        pipeline,
        data.windows("train", n_in, n_out, config.train.stride),
        data.windows("val", n_in, n_out),
        config.train, progress=progress,
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(pipeline.state_dict(), out_dir / "model.s2pk")
    result.history.to_csv(out_dir / "history.csv", index=False)
    report = evaluate(pipeline, data.windows("test", n_in, n_out), config.horizons, data.stats,
                      label=pipeline.kind.value)
    write_json({**report.to_dict(), "best_epoch": result.best_epoch}, out_dir / "metrics.json")
    return pipeline, result, report


def evaluate_checkpoint(config, checkpoint, out_dir, data=None):
    """Rebuild the configured pipeline, load ``checkpoint`` and score the test split."""
    data = prepare_data(config) if data is None else data
    pipeline = build_from_config(config, data.n_channels)
    pipeline.load_state_dict(load_checkpoint(checkpoint))
    n_in, n_out = config.input_hours, config.horizon_hours
    report = evaluate(pipeline, data.windows("test", n_in, n_out), config.horizons, data.stats,
                      label=pipeline.kind.value)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(report.to_dict(), out_dir / "metrics.json")
    return report
