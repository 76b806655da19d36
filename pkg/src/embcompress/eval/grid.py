"""Render benchmark JSON lines as a method x metric x budget grid."""

from __future__ import annotations

import csv
import io
import json
from decimal import ROUND_HALF_UP, Decimal

from ..core.memory import percent_label

TRAIN_METRICS = ("auc", "train_mem", "train_time", "latency")
POSTTRAIN_METRICS = ("recall", "time", "latency")


def read_lines(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def budget_label(beta: float) -> str:
    pct = 100.0 * beta
    return f"{pct:g}%"


def _fmt(metric: str, rec: dict) -> str:
    if rec.get("error"):
        return "error"
    if metric == "auc":
        return f"{rec['auc']:.4f}"
    if metric == "train_mem":
        if rec.get("training_bytes") and rec.get("baseline_bytes"):
            return percent_label(rec["training_bytes"], rec["baseline_bytes"])
        return f"{Decimal(repr(rec['train_mem_pct'])).quantize(Decimal('0.1'), rounding=ROUND_HALF_UP)}%"
    if metric in ("train_time", "time"):
        return f"{rec['train_seconds' if metric == 'train_time' else 'compress_seconds']:.2f}s"
    if metric == "latency":
        return f"{1e3 * rec['latency_seconds']:.2f}ms"
    if metric == "recall":
        return f"{rec['recall']:.4f}"
    raise KeyError(metric)


def cell_text(metric: str, rec: dict | None) -> str:
    """The grid text of one record; infeasible cells carry the reachable
    ratio in parentheses, or "/" when nothing was run."""
    if rec is None:
        return ""
    label = rec.get("label", "")
    if label == "/":
        return "/"
    text = _fmt(metric, rec)
    return f"{text} {label}" if label else text


def grid_rows(records: list[dict]) -> tuple[list[str], list[list[str]]]:
    records = [r for r in records if "method" in r and "budget" in r]
    posttrain = any(r.get("stage") == "posttrain" for r in records)
    metrics = POSTTRAIN_METRICS if posttrain else TRAIN_METRICS
    methods = list(dict.fromkeys(r["method"] for r in records))
    budgets = sorted({r["budget"] for r in records}, reverse=True)
    index = {(r["method"], r["budget"]): r for r in records}
    header = ["method", "metric"] + [budget_label(b) for b in budgets]
    rows = []
    for m in methods:
        for metric in metrics:
            rows.append([m, metric] + [cell_text(metric, index.get((m, b))) for b in budgets])
    return header, rows


def render_csv(records: list[dict]) -> str:
    header, rows = grid_rows(records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def render_text(records: list[dict]) -> str:
    header, rows = grid_rows(records)
    table = [header] + rows
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
