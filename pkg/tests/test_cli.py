import json

import numpy as np
import pytest
from click.testing import CliRunner

from embcompress.cli import main, strip_timing
from embcompress.config import load_config, parse_budget
from embcompress.core import checkpoint
from embcompress.core.errors import ConfigError

SMALL = """
[run]
seed = 0
methods = full, int8_16
budgets = 100%, 10%

[data]
samples = 3000
cardinalities = 300, 200, 100

[model]
d = 8
epochs = 0.5
"""


@pytest.fixture()
def cfg_path(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL)
    return path


def invoke(*args, env=None):
    result = CliRunner().invoke(main, [str(a) for a in args], env=env, catch_exceptions=False)
    return result


def records(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


@pytest.fixture()
def matrix_path(tmp_path):
    m = np.random.default_rng(0).standard_normal((500, 16)).astype(np.float32)
    return checkpoint.save_matrix(m, tmp_path / "m.emsq")


def test_gen_data_writes_dataset_and_skew(cfg_path, tmp_path):
    out = tmp_path / "a"
    r = invoke("gen-data", "--config", cfg_path, "--out", out)
    assert r.exit_code == 0, r.output
    skew = json.loads((out / "skew.json").read_text())
    assert skew["config"]["data"]["samples"] == 3000 and "version" in skew
    first = (out / "dataset.emsq").read_bytes()
    invoke("gen-data", "--config", cfg_path, "--out", out)
    assert (out / "dataset.emsq").read_bytes() == first


def test_bench_train_grid(cfg_path, tmp_path):
    out = tmp_path / "t"
    r = invoke("bench-train", "--config", cfg_path, "--out", out)
    assert r.exit_code == 0, r.output
    recs = {(x["method"], x["budget"]): x for x in records(out / "bench-train.jsonl")}
    assert recs[("full", 1.0)]["train_mem_pct"] == pytest.approx(300.0)
    assert recs[("int8_16", 0.1)]["label"] == "(25.0%)"
    assert "300.0%" in r.output and "(25.0%)" in r.output
    assert (out / "bench-train.txt").read_text() in r.output


def test_bench_train_is_deterministic(cfg_path, tmp_path):
    runs = []
    for name, jobs in (("a", 1), ("b", 1), ("c", 2)):
        invoke("bench-train", "--config", cfg_path, "--out", tmp_path / name, "--jobs", jobs,
               "--methods", "full,double_hash", "--budgets", "100%,50%")
        recs = [strip_timing(x) for x in records(tmp_path / name / "bench-train.jsonl")]
        for x in recs:
            x["config"].pop("out"), x["config"].pop("jobs")
        runs.append(json.dumps(recs, sort_keys=True))
    assert runs[0] == runs[1] == runs[2]


def test_bench_posttrain(matrix_path, tmp_path):
    out = tmp_path / "p"
    r = invoke("bench-posttrain", "--matrix", matrix_path, "--out", out, "--methods", "identity,svd,int8_16",
               "--budgets", "50%,0.1%")
    assert r.exit_code == 0, r.output
    recs = {(x["method"], x["budget"]): x for x in records(out / "bench-posttrain.jsonl")}
    assert recs[("identity", 0.5)]["recall"] == 1.0
    assert recs[("svd", 0.001)]["label"] == "/"
    assert recs[("int8_16", 0.5)]["recall"] > 0.9


def test_compress_and_inspect(matrix_path, tmp_path):
    out = tmp_path / "codec.emsq"
    r = invoke("compress", matrix_path, "--method", "svd", "--budget", "25%", "--out", out)
    assert r.exit_code == 0, r.output
    r = invoke("inspect", out)
    # rank 3 is the largest that fits 25% of 500 x 16 floats
    assert r.output == f"type: svd\nshape: 500x16\nbytes: {(500 + 16) * 3 * 4}\n"


def test_render_formats(cfg_path, tmp_path):
    out = tmp_path / "r"
    invoke("bench-train", "--config", cfg_path, "--out", out, "--methods", "full", "--budgets", "100%")
    text = invoke("render", out / "bench-train.jsonl").output
    csv = invoke("render", out / "bench-train.jsonl", "--format", "csv").output
    assert text.splitlines()[0].split() == ["method", "metric", "100%"]
    assert csv.splitlines()[0] == "method,metric,100%"


def test_errors_are_reported(cfg_path, tmp_path):
    r = CliRunner().invoke(main, ["bench-train", "--config", str(cfg_path), "--methods", " ", "--out", str(tmp_path)])
    assert r.exit_code != 0 and "Error" in r.output
    r = CliRunner().invoke(main, ["gen-data", "--config", str(cfg_path), "--out", str(tmp_path)],
                           env={"EMSQ_DATA__SAMPLES": "0"})
    assert r.exit_code == 1 and "sample count must be >= 1" in r.output
    r = CliRunner().invoke(main, ["bench-posttrain", "--out", str(tmp_path)])
    assert r.exit_code == 1 and "matrix" in r.output


def test_config_layers(cfg_path):
    cfg = load_config(cfg_path, env={"EMSQ_RUN__SEED": "7", "EMSQ_MODEL__LR": "0.01"}, budgets="50%")
    assert cfg.seed == 7 and cfg.model.lr == 0.01 and cfg.budgets == (0.5,)
    assert cfg.data.cardinalities == (300, 200, 100)
    assert parse_budget("0.1%") == pytest.approx(0.001) and parse_budget("0.5") == 0.5
    with pytest.raises(ConfigError):
        load_config(cfg_path, env={"EMSQ_MODEL__WIDTH": "3"})
