"""Acceptance suite: one test per headline criterion, each printing a
PASS/FAIL line (visible even with output capture on) before asserting."""

import json
import time

import numpy as np
import pytest
from click.testing import CliRunner

from embcompress.budget import POSTTRAIN_METHODS, TRAIN_METHODS, percent_label, solve
from embcompress.cli import main, run_train_grid, strip_timing
from embcompress.config import RunConfig
from embcompress.core import FeatureSpace, baseline_bytes, sparse_bytes
from embcompress.data import Dataset
from embcompress.eval import auc, recall_overlap, time_batch
from embcompress.posttrain import (
    DedupCodec,
    IntCodec,
    PqCodec,
    SvdCodec,
    ThresholdPruneCodec,
    TtCodec,
    compress,
)
from embcompress.stores import CompoTable, FullTable, build_store
from embcompress.stores.quant import dequantize, quantize

import oracles


@pytest.fixture()
def report(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail
    return emit


def test_gradient_oracle(report):
    start = time.perf_counter()
    worst = {}
    for name, store in oracles.grad_stores().items():
        ids, dense, labels = oracles.grad_batch()
        errors = oracles.gradient_errors(oracles.grad_model(), store, ids, dense, labels)
        worst[name] = max(errors.values())
    seconds = time.perf_counter() - start
    top = max(worst, key=worst.get)
    ok = worst[top] < 1e-4 and seconds < 60
    report("gradient oracle", ok, f"{len(worst)} stores, worst rel err {worst[top]:.2e} ({top}), {seconds:.1f}s")


def test_budget_soundness(report):
    space = FeatureSpace((50_000, 30_000, 15_000, 5_000))
    d = 16
    matrix = np.random.default_rng(0).standard_normal((space.n, d)).astype(np.float32)
    bad, checked = [], 0
    for stage, methods in (("train", TRAIN_METHODS), ("posttrain", POSTTRAIN_METHODS)):
        for method in methods:
            for beta in (0.5, 0.1, 0.01, 0.001):
                plan = solve(method, beta, space, d, stage=stage)
                if not plan.feasible:
                    continue
                if stage == "train":
                    store = build_store(plan, space, d, seed=0)
                    if method == "deeplight":
                        store.prune_step()
                    got = store.freeze().inference_bytes()
                else:
                    _, got, _ = compress(matrix, plan, seed=0)
                checked += 1
                if method == "identity":
                    continue  # the uncompressed reference row
                if not 0.99 * plan.achieved_bytes <= got <= plan.achieved_bytes <= beta * plan.baseline_bytes:
                    bad.append((stage, method, beta, got, plan.achieved_bytes))
    labels = {
        "int8_16@10%": solve("int8_16", 0.1, space, d).cell_label(),
        "alpt@50%": solve("alpt", 0.5, space, d).cell_label(),
        "alpt@10%": solve("alpt", 0.1, space, d).cell_label(),
    }
    expected = {"int8_16@10%": "(25.0%)", "alpt@50%": "(56.3%)", "alpt@10%": "(31.3%)"}
    ok = not bad and labels == expected
    report("budget soundness", ok, f"{checked} feasible cells, violations {bad}, labels {labels}")


def test_training_memory(report):
    space = FeatureSpace((50_000, 30_000, 15_000, 5_000))
    base = baseline_bytes(space, 16)
    full = build_store(solve("full", 1.0, space, 16), space, 16)
    pruned = build_store(solve("deeplight", 0.5, space, 16), space, 16)
    got = (percent_label(full.training_bytes(), base), percent_label(pruned.training_bytes(), base))
    report("training memory", got == ("300.0%", "306.3%"), f"full {got[0]}, pruning {got[1]}")


def test_auc_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        size = int(rng.integers(2, 1001))
        scores = np.round(rng.random(size), int(rng.integers(1, 4)))  # coarse grid forces ties
        labels = rng.integers(0, 2, size)
        labels[:2] = [0, 1]
        worst = max(worst, abs(auc(scores, labels) - oracles.auc_pairs(scores, labels)))
    report("AUC oracle equivalence", worst <= 1e-12, f"200 instances, max diff {worst:.1e}")


def test_stochastic_rounding_unbiased(report):
    draws = 100_000
    codes = quantize(np.full(draws, 0.3), 0.25, 0.0, 8, "stochastic", np.random.default_rng(7))
    values = dequantize(codes, 0.25, 0.0, np.float64)
    se = 0.25 * np.sqrt(0.2 * 0.8 / draws)
    z = abs(values.mean() - 0.3) / se
    report("stochastic rounding", z < 4, f"mean {values.mean():.5f}, {z:.2f} standard errors from 0.3")


def test_exactness_suite(report):
    rng = np.random.default_rng(5)
    checks = {}
    m = rng.standard_normal((80, 24))
    sv = np.linalg.svd(m, compute_uv=False)
    checks["svd energy"] = all(
        abs(np.sum((SvdCodec.fit(m, r).decompress() - m) ** 2) - np.sum(sv[r:] ** 2)) <= 1e-6 * np.sum(sv[r:] ** 2)
        for r in (1, 7, 16))
    t = rng.standard_normal((64, 16))
    checks["tt round trip"] = np.linalg.norm(TtCodec.fit(t).decompress() - t) / np.linalg.norm(t) < 1e-5
    injective = True
    for n in range(1, 10_001):
        m1 = int(np.ceil(np.sqrt(n)))
        m2 = -(-n // m1)
        i, j = CompoTable(n, 1, m1, m2, seed=0).index_pairs(np.arange(n))
        injective &= np.unique(i * m2 + j).size == n
    checks["compo injective"] = bool(injective)
    u = rng.standard_normal((40, 8)).astype(np.float32)
    checks["dedup identity"] = np.array_equal(DedupCodec.fit(u, width=4, bucket=1e-6).decompress(), u)
    tight = True
    for seed in range(30):
        r = np.random.default_rng(seed)
        w = r.integers(-3, 4, size=(int(r.integers(1, 30)), int(r.integers(1, 10)))).astype(np.float32)
        budget = int(r.integers(12, 2000))
        c = ThresholdPruneCodec.fit(w, budget=budget)
        keep = oracles.prune_keep_by_sort(w, c.sparse.nnz)
        tight &= c.nbytes() <= budget and np.array_equal(c.decompress() != 0, keep & (w != 0))
        if c.sparse.nnz < np.count_nonzero(w):
            tight &= sparse_bytes(*w.shape, c.sparse.nnz + 1)[1] > budget
    checks["prune tightness"] = bool(tight)
    failed = [k for k, v in checks.items() if not v]
    report("exactness suite", not failed, f"{len(checks) - len(failed)}/{len(checks)} checks, failed {failed}")


@pytest.fixture(scope="module")
def e2e_records():
    start = time.perf_counter()
    records = run_train_grid(RunConfig(methods=TRAIN_METHODS, budgets=(0.5, 0.001), seed=0))
    return records, time.perf_counter() - start


def test_end_to_end_regression(report, e2e_records):
    records, seconds = e2e_records
    cells = {(r["method"], r["budget"]): r for r in records}
    baseline = cells[("full", 0.5)]["auc"]  # trained at full size, labelled infeasible
    errors = [k for k, r in cells.items() if r.get("error")]
    gaps = {m: baseline - cells[(m, 0.5)]["auc"] for m in TRAIN_METHODS
            if cells[(m, 0.5)]["feasible"] and m != "full"}
    worst = max(gaps, key=gaps.get)
    trend = {m: cells[(m, 0.5)]["auc"] - cells[(m, 0.001)]["auc"]
             for m in ("double_hash", "compo", "memcom", "robe") if cells[(m, 0.001)]["feasible"]}
    ok = not errors and gaps[worst] <= 0.03 and all(v >= -0.005 for v in trend.values()) and seconds < 600
    report("end-to-end regression", ok,
           f"full AUC {baseline:.4f}; worst gap at 50% {gaps[worst]:+.4f} ({worst}); "
           f"hashing 50%-0.1% {', '.join(f'{k} {v:+.4f}' for k, v in trend.items())}; "
           f"errors {errors}; {seconds:.0f}s")


def test_retrieval_regression(report):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((10_000, 64)).astype(np.float32)
    q = rng.standard_normal((100, 64))
    rec = {
        "identity": recall_overlap(m, m, q, 10),
        "int16": recall_overlap(m, IntCodec.fit(m, bits=16), q, 10),
        "int8": recall_overlap(m, IntCodec.fit(m, bits=8), q, 10),
        "svd64": recall_overlap(m, SvdCodec.fit(m, 64), q, 10),
    }
    pq = PqCodec.fit(m, parts=8, K=64, seed=0).decompress()
    parts_ok = all(
        np.mean((pq[:, s] - m[:, s]) ** 2) <= np.mean((m[:, s] - m[:, s].mean(axis=0)) ** 2)
        for s in (slice(8 * p, 8 * p + 8) for p in range(8)))
    ok = rec["identity"] == 1.0 and rec["int16"] >= rec["int8"] - 0.02 and rec["svd64"] == 1.0 and parts_ok
    report("retrieval regression", ok,
           ", ".join(f"{k} {v:.3f}" for k, v in rec.items()) + f", PQ per-part MSE ok {parts_ok}")


def test_latency_ordering(report):
    space = FeatureSpace((50_000, 30_000, 15_000, 5_000))
    ids = np.random.default_rng(1).integers(0, space.n, 4096)
    stores = {
        "full": FullTable(space.n, 16, seed=0),
        "tt_rec": build_store(solve("tt_rec", 0.01, space, 16), space, 16, seed=0),
        "int8": build_store(solve("int8_16", 0.25, space, 16), space, 16, seed=0),
    }
    t = {k: time_batch(s.freeze(), ids, repeats=7) for k, s in stores.items()}
    ok = t["tt_rec"] > t["full"] and t["int8"] <= 3 * t["full"]
    report("latency ordering", ok, ", ".join(f"{k} {1e3 * v:.3f}ms" for k, v in t.items()))


def test_cli_determinism(report, tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nmethods = full, robe, int8_16\nbudgets = 50%, 10%\n"
                   "[data]\nsamples = 4000\ncardinalities = 400, 300, 100\n[model]\nd = 8\nepochs = 0.5\n")
    matrix = tmp_path / "m.emsq"
    from embcompress.core import checkpoint

    checkpoint.save_matrix(np.random.default_rng(3).standard_normal((800, 16)).astype(np.float32), matrix)
    runner = CliRunner()
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        for cmd in (["gen-data"], ["bench-train"],
                    ["bench-posttrain", "--matrix", str(matrix), "--methods", "identity,svd,pq,dedup"]):
            result = runner.invoke(main, cmd + ["--config", str(ini), "--out", str(out)])
            assert result.exit_code == 0, result.output
        reports = {}
        for report_name in ("bench-train", "bench-posttrain"):
            lines = (out / f"{report_name}.jsonl").read_text().splitlines()
            recs = [strip_timing(json.loads(line)) for line in lines]
            for r in recs:
                r["config"].pop("out")
            reports[report_name] = json.dumps(recs, sort_keys=True)
        reports["dataset"] = (out / "dataset.emsq").read_bytes().hex()
        outputs.append(reports)
    same = [k for k in outputs[0] if outputs[0][k] == outputs[1][k]]
    report("CLI determinism", len(same) == 3, f"identical across reruns: {', '.join(same)}")
