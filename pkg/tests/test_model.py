import math

import numpy as np
import pytest

from embcompress.budget import solve
from embcompress.core.errors import InvalidArgument, StateError
from embcompress.data import SyntheticSpec, generate
from embcompress.model import (
    SGD,
    Adam,
    DlrmLite,
    Scheduler,
    Stage,
    TrainConfig,
    bce_from_logits,
    coalesce,
    train,
    train_loss,
)
from embcompress.stores import FullTable

import oracles


@pytest.fixture(scope="module")
def small_data():
    return generate(SyntheticSpec(cardinalities=(200, 100, 50, 20), samples=6000, seed=1))


# -- forward ---------------------------------------------------------------------


def test_zero_model_predicts_half():
    model = DlrmLite(3, 4, 2, seed=0).zero_()
    store = FullTable(10, 4, seed=0)
    probs, _ = model.forward(store, np.array([[0, 4, 9], [1, 2, 3]]), np.ones((2, 2)))
    assert np.all(probs == 0.5)


def test_forward_matches_hand_calculation():
    """One field, d = 2, one dense feature, hidden width 2, written out by hand."""
    model = DlrmLite(1, 2, 1, hidden=2, dtype=np.float64)
    p = model.params
    p["W0"][:] = [[0.5], [-1.0]]
    p["b0"][:] = [0.1, 0.2]
    p["W1"][:] = [[1.0, 0.0, 2.0], [0.0, -1.0, 1.0]]
    p["b1"][:] = [0.0, 0.5]
    p["W2"][:] = [[1.0, -2.0]]
    p["b2"][:] = [0.25]
    store = FullTable(1, 2, dtype=np.float64, weight=np.array([[3.0, 4.0]]))
    x = 2.0
    h = [max(0.5 * x + 0.1, 0), max(-1.0 * x + 0.2, 0)]  # [1.1, 0]
    dot = h[0] * 3.0 + h[1] * 4.0  # 3.3
    a = [max(1.0 * h[0] + 2.0 * dot, 0), max(-1.0 * h[1] + dot + 0.5, 0)]  # [7.7, 3.8]
    logit = a[0] - 2.0 * a[1] + 0.25
    probs, cache = model.forward(store, np.array([[0]]), np.array([[x]]))
    assert cache.logits[0] == pytest.approx(logit)
    assert probs[0] == pytest.approx(1 / (1 + math.exp(-logit)))


def test_forward_preserves_order_and_checks_shapes():
    model = DlrmLite(2, 4, 3, seed=0)
    store = FullTable(10, 4, seed=1)
    ids = np.array([[0, 5], [1, 6], [2, 7]])
    dense = np.random.default_rng(0).standard_normal((3, 3))
    probs, _ = model.forward(store, ids, dense)
    singles = [model.forward(store, ids[i:i + 1], dense[i:i + 1])[0][0] for i in range(3)]
    assert probs.shape == (3,) and np.allclose(probs, singles)
    assert np.all((probs > 0) & (probs < 1))
    with pytest.raises(InvalidArgument):
        model.forward(store, ids[:, :1], dense)
    with pytest.raises(InvalidArgument):
        model.forward(store, ids, dense[:, :2])
    with pytest.raises(InvalidArgument):
        model.forward(FullTable(10, 3), ids, dense)
    assert model.n_pairs == 3


# -- backward --------------------------------------------------------------------


def test_logit_gradient_at_half():
    model = DlrmLite(1, 2, 1, seed=0).zero_()
    _, cache = model.forward(FullTable(3, 2), np.array([[1]]), np.zeros((1, 1)))
    grads, _ = model.backward(cache, np.array([1.0]))
    assert grads["b2"][0] == pytest.approx(-0.5)


def test_stale_cache_rejected():
    model = DlrmLite(1, 2, 1, seed=0)
    store = FullTable(3, 2)
    _, cache = model.forward(store, np.array([[1]]), np.zeros((1, 1)))
    grads, _ = model.backward(cache, np.array([1.0]))
    model.apply_gradients(grads, SGD(0.1))
    with pytest.raises(StateError):
        model.backward(cache, np.array([1.0]))


def test_model_gradients_match_finite_differences():
    store = oracles.grad_stores()["full"]
    ids, dense, labels = oracles.grad_batch(seed=4)
    errors = oracles.gradient_errors(oracles.grad_model(), store, ids, dense, labels)
    assert max(errors.values()) < 1e-4, errors


def test_symmetric_batch_is_stationary():
    """Two copies of one sample with opposite labels and a zero logit: every
    per-sample gradient is linear in (p - y), which sums to zero."""
    model = oracles.grad_model()
    store = oracles.grad_stores()["full"]
    ids, dense, _ = oracles.grad_batch(batch=1)
    _, cache = model.forward(store, ids, dense)
    model.params["b2"] -= cache.logits
    ids2, dense2 = np.repeat(ids, 2, axis=0), np.repeat(dense, 2, axis=0)
    _, cache = model.forward(store, ids2, dense2)
    assert np.allclose(cache.probs, 0.5)
    grads, emb = model.backward(cache, np.array([1.0, 0.0]))
    assert all(np.allclose(g, 0, atol=1e-12) for g in grads.values())
    assert np.allclose(store.parameter_grads(ids2.ravel(), emb)["weight"], 0, atol=1e-12)


def test_bce_properties():
    assert bce_from_logits(np.array([0.0]), np.array([1.0])) == pytest.approx(math.log(2))
    assert bce_from_logits(np.array([50.0, -50.0]), np.array([1.0, 0.0])) < 1e-20
    assert bce_from_logits(np.array([1.0, -2.0]), np.array([0.0, 1.0])) > 0


# -- optimizers ------------------------------------------------------------------


def test_adam_first_step_matches_formula():
    opt = Adam(lr=0.1)
    opt.tick()
    param = np.array([1.0, -1.0])
    grad = np.array([0.5, -2.0])
    opt.update(param, grad, {})
    # after bias correction the first step is lr * g / (|g| + eps)
    assert np.allclose(param, [1.0 - 0.1, -1.0 + 0.1], atol=1e-6)


def test_adam_row_updates_leave_other_rows():
    opt = Adam(lr=0.1)
    opt.tick()
    param = np.zeros((4, 2))
    slot = {}
    opt.update(param, np.ones((2, 2)), slot, rows=np.array([1, 1]))
    assert np.all(param[[0, 2, 3]] == 0) and np.all(param[1] < 0)
    assert slot["m"].shape == (4, 2)


def test_coalesce_sums_duplicates():
    rows, grads = coalesce(np.array([3, 1, 3]), np.array([[1.0], [2.0], [4.0]]))
    assert rows.tolist() == [1, 3] and grads.ravel().tolist() == [2.0, 5.0]


# -- training --------------------------------------------------------------------


def test_scheduler_stages():
    stages = Scheduler.for_method("deeplight").stages
    assert [s.kind for s in stages] == ["warmup", "compress", "retrain"]
    assert [s.kind for s in Scheduler.for_method("full").stages] == ["train"]
    with pytest.raises(InvalidArgument):
        Stage("search", 1.0)


def test_train_full_learns_and_reports(small_data):
    plan = solve("full", 1.0, small_data.space, 8)
    config = TrainConfig(d=8)
    result = train(plan, small_data, Scheduler.for_method("full", epochs=1.0), seed=0, config=config)
    r = result.report
    assert r["auc"] > 0.5
    assert r["train_mem_pct"] == pytest.approx(300.0)
    assert r["training_bytes"] == 3 * r["inference_bytes"]
    assert set(r) >= {"auc", "inference_bytes", "training_bytes", "train_seconds", "stage_breakdown", "seed", "plan"}
    again = train(plan, small_data, Scheduler.for_method("full", epochs=1.0), seed=0, config=config).report
    assert abs(again["auc"] - r["auc"]) < 1e-9


def test_train_loss_non_increasing_first_epoch(small_data):
    plan = solve("full", 1.0, small_data.space, 8)
    losses = []
    for epochs in (0.25, 0.5, 0.75, 1.0):
        sched = Scheduler([Stage("train", epochs, early_stop=False)])
        res = train(plan, small_data, sched, seed=0, config=TrainConfig(d=8))
        losses.append(train_loss(res.model, res.store, small_data))
    assert all(b <= a for a, b in zip(losses, losses[1:])), losses


def test_deeplight_reports_pruned_accounting(small_data):
    plan = solve("deeplight", 0.5, small_data.space, 8)
    r = train(plan, small_data, Scheduler.for_method("deeplight", epochs=0.5), seed=0,
              config=TrainConfig(d=8)).report
    base = r["baseline_bytes"]
    assert r["training_bytes"] == 3 * base + 4 * small_data.space.n
    assert r["inference_bytes"] <= 0.5 * base
    assert [s["stage"] for s in r["stage_breakdown"]] == ["warmup", "compress", "retrain"]
