"""Command-line entry point: ``embcompress <command>``.

Every benchmark writes one JSON object per grid cell to ``<out>/<command>.jsonl``
and the rendered grid to ``<out>/<command>.txt``. Each line embeds the run
config and the library version, so any line can be replayed.
"""

from __future__ import annotations

import json
import multiprocessing
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .budget import POSTTRAIN_METHODS, TRAIN_METHODS, solve
from .config import RunConfig, load_config
from .core import checkpoint
from .core.errors import ConfigError
from .core.memory import baseline_bytes
from .data import CsvSchema, Dataset, SyntheticSpec, generate, load_csv, skew_summary
from .eval.grid import read_lines, render_csv, render_text
from .eval.metrics import recall_overlap, time_batch

# fields that vary between identical runs
TIMING_KEYS = ("train_seconds", "compress_seconds", "latency_seconds", "seconds")


def strip_timing(record):
    """Copy of a report with wall-clock fields removed, for comparisons."""
    if isinstance(record, dict):
        return {k: strip_timing(v) for k, v in record.items() if k not in TIMING_KEYS}
    if isinstance(record, list):
        return [strip_timing(v) for v in record]
    return record


def load_dataset(cfg: RunConfig) -> Dataset:
    data = cfg.data
    if data.source == "synthetic":
        spec = SyntheticSpec(cardinalities=tuple(data.cardinalities), zipf_s=data.zipf_s,
                             dense_dim=data.dense_dim, samples=data.samples, seed=cfg.seed)
        return generate(spec)
    if data.source == "csv":
        schema = CsvSchema(data.label, tuple(data.categorical), tuple(data.numeric), data.log_transform,
                           seed=cfg.seed)
        return load_csv(data.path, schema)
    return Dataset.from_container(checkpoint.read(data.path))


def _latency_ids(n: int, size: int, seed: int) -> np.ndarray:
    return np.random.default_rng([seed, 0x1A7]).integers(0, n, size=size)


# -- training grid ----------------------------------------------------------------

_SHARED: dict = {}


def train_cell(cfg: RunConfig, dataset: Dataset, method: str, beta: float) -> dict:
    """Train one (method, budget) cell. Infeasible plans run at the nearest
    reachable configuration and carry its ratio as the label."""
    from .model import Scheduler, TrainConfig, train

    rec = {"method": method, "budget": beta, "stage": "train", "label": "", "error": None}
    try:
        plan = solve(method, beta, dataset.space, cfg.model.d)
        rec["label"] = plan.cell_label()
        rec["feasible"] = plan.feasible
        if rec["label"] == "/":
            return rec
        tcfg = TrainConfig(d=cfg.model.d, lr=cfg.model.lr, batch_size=cfg.model.batch_size,
                           hidden=cfg.model.hidden)
        sched = Scheduler.for_method(method, cfg.model.epochs, cfg.model.patience)
        result = train(plan, dataset, sched, seed=cfg.seed, config=tcfg, nearest=True)
        report = result.report
        ids = _latency_ids(dataset.space.n, cfg.posttrain.latency_batch, cfg.seed)
        rec.update({k: report[k] for k in ("auc", "test_auc", "inference_bytes", "training_bytes",
                                           "baseline_bytes", "train_mem_pct", "train_seconds",
                                           "stage_breakdown", "plan")})
        rec["latency_seconds"] = time_batch(result.store, ids)
    except Exception as exc:  # a failing cell must not abort the grid
        rec["error"] = f"{type(exc).__name__}: {exc}"
        rec["traceback"] = traceback.format_exc(limit=3)
    return rec


def _train_worker(args):
    method, beta = args
    return train_cell(_SHARED["cfg"], _SHARED["dataset"], method, beta)


def _pool(jobs: int):
    # fork shares the already-built dataset with the workers
    return ProcessPoolExecutor(jobs, mp_context=multiprocessing.get_context("fork"))


def run_train_grid(cfg: RunConfig) -> list[dict]:
    unknown = [m for m in cfg.methods if m not in TRAIN_METHODS]
    if unknown:
        raise ConfigError(f"unknown training methods {unknown}; choose from {list(TRAIN_METHODS)}")
    dataset = load_dataset(cfg)
    cells = [(m, b) for m in cfg.methods for b in cfg.budgets]
    if cfg.jobs > 1 and len(cells) > 1:
        _SHARED.update(cfg=cfg, dataset=dataset)
        try:
            with _pool(cfg.jobs) as pool:
                records = list(pool.map(_train_worker, cells))
        finally:
            _SHARED.clear()
    else:
        records = [train_cell(cfg, dataset, m, b) for m, b in cells]
    return records


# -- post-training grid -----------------------------------------------------------


def load_or_make_matrix(cfg: RunConfig) -> np.ndarray:
    if cfg.posttrain.matrix:
        return checkpoint.load_matrix(cfg.posttrain.matrix)
    raise ConfigError("post-training benchmarks need a matrix (--matrix or [posttrain] matrix)")


def posttrain_cell(cfg: RunConfig, matrix: np.ndarray, queries: np.ndarray, method: str, beta: float) -> dict:
    from .posttrain import compress

    rec = {"method": method, "budget": beta, "stage": "posttrain", "label": "", "error": None}
    try:
        n, d = matrix.shape
        plan = solve(method, beta, n, d, stage="posttrain")
        rec["feasible"] = plan.feasible
        rec["plan"] = plan.to_dict()
        if not plan.feasible:
            rec["label"] = "/"
            return rec
        codec, nbytes, seconds = compress(matrix, plan, seed=cfg.seed)
        ids = _latency_ids(n, cfg.posttrain.latency_batch, cfg.seed)
        rec.update({
            "recall": recall_overlap(matrix, codec, queries, min(cfg.posttrain.k, n)),
            "compressed_bytes": int(nbytes),
            "baseline_bytes": int(baseline_bytes(n, d)),
            "compress_seconds": seconds,
            "latency_seconds": time_batch(codec, ids),
        })
    except Exception as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
        rec["traceback"] = traceback.format_exc(limit=3)
    return rec


def _post_worker(args):
    method, beta = args
    s = _SHARED
    return posttrain_cell(s["cfg"], s["matrix"], s["queries"], method, beta)


def run_posttrain_grid(cfg: RunConfig, matrix: np.ndarray) -> list[dict]:
    unknown = [m for m in cfg.methods if m not in POSTTRAIN_METHODS]
    if unknown:
        raise ConfigError(f"unknown post-training methods {unknown}; choose from {list(POSTTRAIN_METHODS)}")
    matrix = np.asarray(matrix, dtype=np.float32)
    queries = np.random.default_rng([cfg.seed, 0x9E]).standard_normal((cfg.posttrain.queries, matrix.shape[1]))
    cells = [(m, b) for m in cfg.methods for b in cfg.budgets]
    if cfg.jobs > 1 and len(cells) > 1:
        _SHARED.update(cfg=cfg, matrix=matrix, queries=queries)
        try:
            with _pool(cfg.jobs) as pool:
                records = list(pool.map(_post_worker, cells))
        finally:
            _SHARED.clear()
    else:
        records = [posttrain_cell(cfg, matrix, queries, m, b) for m, b in cells]
    return records


# -- output -----------------------------------------------------------------------


def write_report(records: list[dict], cfg: RunConfig, name: str) -> Path:
    """Single writer for all cells: JSON lines plus the rendered grid."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            line = dict(rec, config=cfg.to_dict(), version=__version__)
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    (out / f"{name}.txt").write_text(render_text(records), encoding="utf-8")
    return path


def _config(ctx_cfg, seed, out, methods, budgets, jobs, **extra) -> RunConfig:
    return load_config(ctx_cfg, seed=seed, out=out, methods=methods, budgets=budgets, jobs=jobs, **extra)


def _fail(exc: Exception):
    raise click.ClickException(str(exc)) from exc


_common = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), help="INI run config."),
    click.option("--seed", type=int, default=None, help="Override the run seed."),
    click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory."),
    click.option("--methods", default=None, help="Comma-separated method list."),
    click.option("--budgets", default=None, help="Comma-separated budgets, e.g. 50%,10%."),
    click.option("--jobs", type=int, default=None, help="Parallel grid cells."),
]


def common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Embedding compression benchmarks."""


@main.command("gen-data")
@common
def gen_data(config_path, seed, out, methods, budgets, jobs):
    """Write a dataset checkpoint and its skew summary."""
    try:
        cfg = _config(config_path, seed, out, methods, budgets, jobs)
        dataset = load_dataset(cfg)
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        data_path = checkpoint.save(dataset.to_container(), outdir / "dataset.emsq")
        summary = dict(skew_summary(dataset), config=cfg.to_dict(), version=__version__)
        (outdir / "skew.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except (ConfigError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {data_path} ({len(dataset)} samples, {dataset.space.n} features)")
    click.echo(f"top-10% share {summary['top_share']:.3f}, tail fraction {summary['tail_fraction']:.3f}")


@main.command("bench-train")
@common
def bench_train(config_path, seed, out, methods, budgets, jobs):
    """Train every (method, budget) cell and write the grid."""
    try:
        cfg = _config(config_path, seed, out, methods, budgets, jobs)
        records = run_train_grid(cfg)
        path = write_report(records, cfg, "bench-train")
    except (ConfigError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(render_text(records), nl=False)
    click.echo(f"report: {path}")


@main.command("bench-posttrain")
@common
@click.option("--matrix", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Embedding matrix to compress.")
def bench_posttrain(config_path, seed, out, methods, budgets, jobs, matrix):
    """Compress a matrix with every (codec, budget) cell and write the grid."""
    try:
        cfg = _config(config_path, seed, out, methods, budgets, jobs)
        if matrix:
            cfg.posttrain.matrix = matrix
        records = run_posttrain_grid(cfg, load_or_make_matrix(cfg))
        path = write_report(records, cfg, "bench-posttrain")
    except (ConfigError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(render_text(records), nl=False)
    click.echo(f"report: {path}")


@main.command()
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", required=True, type=click.Choice(POSTTRAIN_METHODS))
@click.option("--budget", "budget_text", default="10%", help="Budget, e.g. 10%.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Codec checkpoint path.")
def compress(matrix, method, budget_text, seed, out_path):
    """Compress one matrix under one budget and save the codec."""
    from .config import parse_budget
    from .posttrain import compress as fit

    try:
        values = checkpoint.load_matrix(matrix)
        n, d = values.shape
        plan = solve(method, parse_budget(budget_text), n, d, stage="posttrain")
        codec, nbytes, seconds = fit(values, plan, seed=seed)
        checkpoint.save(codec.to_container(), out_path)
    except (ConfigError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(f"{method}: {nbytes} bytes ({100.0 * nbytes / baseline_bytes(n, d):.3f}% of baseline) "
               f"in {seconds:.2f}s -> {out_path}")


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def inspect(path):
    """Print a checkpoint's type tag, shape and payload bytes."""
    try:
        c = checkpoint.read(path)
    except (ValueError, OSError) as exc:
        _fail(exc)
    meta = c.meta
    if "n" in meta and "d" in meta:
        shape = f"{meta['n']}x{meta['d']}"
    elif c.kind == "dataset":
        shape = f"{c.arrays['ids'].shape[0]}x{c.arrays['ids'].shape[1]}"
    elif c.arrays:
        first = next(iter(c.arrays.values()))
        shape = "x".join(map(str, first.shape))
    else:
        shape = "?"
    click.echo(f"type: {c.kind}")
    click.echo(f"shape: {shape}")
    click.echo(f"bytes: {c.payload_bytes}")


@main.command()
@click.argument("report", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text")
def render(report, fmt):
    """Render a JSON-lines report as a grid."""
    try:
        records = read_lines(Path(report).read_text(encoding="utf-8"))
    except (ValueError, OSError) as exc:
        _fail(exc)
    click.echo(render_csv(records) if fmt == "csv" else render_text(records), nl=False)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
