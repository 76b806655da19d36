import copy
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embcompress.core.errors import InvalidArgument, UndefinedMetric
from embcompress.eval import MetricsReport, auc, read_lines, recall_overlap, render_csv, render_text, time_batch, top_k
from embcompress.posttrain import IntCodec

import oracles

GOLDEN = Path(__file__).parent / "golden"


# -- AUC -------------------------------------------------------------------------


def test_auc_example():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_auc_ties_count_half():
    assert auc([0.5, 0.5], [0, 1]) == 0.5
    assert auc([1, 1, 0], [1, 0, 0]) == 0.75


def test_auc_undefined():
    with pytest.raises(UndefinedMetric):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(InvalidArgument):
        auc([0.1], [0, 1])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 60), st.integers(0, 10**6))
def test_auc_matches_pair_count(n, seed):
    rng = np.random.default_rng(seed)
    scores = rng.integers(0, 5, n) / 4.0
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    assert abs(auc(scores, labels) - oracles.auc_pairs(scores, labels)) <= 1e-12


# -- recall ----------------------------------------------------------------------


def test_top_k_breaks_ties_by_index():
    assert top_k(np.array([1.0, 3.0, 3.0, 2.0, 3.0]), 2).tolist() == [[1, 2]]
    assert top_k(np.array([[0.0, 0.0, 0.0]]), 5).tolist() == [[0, 1, 2]]
    rng = np.random.default_rng(0)
    s = rng.integers(0, 4, (20, 30)).astype(float)
    expected = oracles.topk_sorted(np.eye(30), s, 7)
    assert [set(row) for row in top_k(s, 7)] == expected


def test_recall_overlap():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((300, 16)).astype(np.float32)
    q = rng.standard_normal((20, 16))
    assert recall_overlap(m, m, q, 10) == 1.0
    assert recall_overlap(m, -m, q, 10) == 0.0
    r = recall_overlap(m, IntCodec.fit(m, bits=8), q, 10)
    assert 0.8 <= r <= 1.0
    with pytest.raises(InvalidArgument):
        recall_overlap(m, m, q[:, :3], 10)
    with pytest.raises(InvalidArgument):
        recall_overlap(m, m, q, 0)


def test_time_batch():
    calls = []
    t = time_batch(lambda b: calls.append(len(b)), np.arange(5))
    assert t >= 0 and calls == [5] * 4
    with pytest.raises(InvalidArgument):
        time_batch(lambda b: None, np.arange(3), repeats=2)


def test_metrics_report_validation():
    r = MetricsReport(0.7, 100, 300, 1.5, 0.01)
    assert r.to_dict()["recall_at_k"] is None
    with pytest.raises(InvalidArgument):
        MetricsReport(1.2, 100, 300, 1.5, 0.01)
    with pytest.raises(InvalidArgument):
        MetricsReport(0.5, -1, 300, 1.5, 0.01)
    with pytest.raises(InvalidArgument):
        MetricsReport(0.5, 1, 300, float("nan"), 0.01)


# -- grid rendering --------------------------------------------------------------


@pytest.mark.parametrize("name", ["grid", "posttrain"])
def test_grid_matches_golden(name):
    records = read_lines((GOLDEN / f"{name}_records.jsonl").read_text())
    assert render_text(records) == (GOLDEN / f"{name}.txt").read_text()
    assert render_csv(records) == (GOLDEN / f"{name}.csv").read_text()


def test_grid_ignores_record_order_and_unrelated_keys():
    records = read_lines((GOLDEN / "grid_records.jsonl").read_text())
    shuffled = copy.deepcopy(records)
    shuffled.sort(key=lambda r: (r["budget"], json.dumps(r)))
    shuffled.sort(key=lambda r: r["method"] != "full")  # keep method order
    for r in shuffled:
        r["config"] = {"seed": 0}
    assert render_text(shuffled) == render_text(records)


def test_train_mem_cell_rounds_half_up():
    from embcompress.eval.grid import cell_text

    assert cell_text("train_mem", {"train_mem_pct": 306.25}) == "306.3%"
    assert cell_text("train_mem", {"train_mem_pct": 306.25, "training_bytes": 49, "baseline_bytes": 16}) == "306.3%"
