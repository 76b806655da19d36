"""Metrics (AUC, recall overlap, latency) and grid rendering."""

from .grid import read_lines, render_csv, render_text
from .metrics import MetricsReport, auc, recall_overlap, time_batch, top_k

__all__ = ["MetricsReport", "auc", "read_lines", "recall_overlap", "render_csv", "render_text", "time_batch", "top_k"]
