"""Staged training loop with early stopping on validation AUC."""

from __future__ import annotations

import copy
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..core.errors import InvalidArgument
from ..core.memory import baseline_bytes
from ..eval.metrics import auc
from .dlrm import DlrmLite
from .optim import make_optimizer

STAGE_KINDS = ("warmup", "compress", "retrain", "train")


@dataclass
class Stage:
    kind: str
    epochs: float
    patience: int = 3
    early_stop: bool = True

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise InvalidArgument(f"unknown stage kind {self.kind!r}")
        if self.epochs <= 0:
            raise InvalidArgument("stage epochs must be positive")


@dataclass
class Scheduler:
    stages: list[Stage]

    @classmethod
    def for_method(cls, method: str, epochs: float = 3.0, patience: int = 3) -> "Scheduler":
        """Single training stage, or warm-up / prune / retrain for pruning."""
        if method == "deeplight":
            return cls([Stage("warmup", 1.0, early_stop=False),
                        Stage("compress", 1.0, early_stop=False),
                        Stage("retrain", epochs, patience)])
        return cls([Stage("train", epochs, patience)])


@dataclass
class TrainConfig:
    d: int = 16
    lr: float = 1e-3
    batch_size: int = 128
    hidden: int = 32
    optimizer: str = "adam"
    eval_every: float = 0.25
    eval_batch: int = 8192
    prune_every: int = 10
    dtype: str = "float32"


@dataclass
class TrainResult:
    store: object
    model: DlrmLite
    report: dict = field(default_factory=dict)


def evaluate(model, store, dataset, split: str = "val", batch: int = 8192) -> float:
    part = dataset.part(split)
    scores = model.predict(store, part.ids, part.dense, batch)
    return auc(scores, part.labels)


def train_loss(model, store, dataset, split: str = "train", limit: int | None = None) -> float:
    part = dataset.part(split)
    sl = slice(None) if limit is None else slice(0, limit)
    _, cache = model.forward(store, part.ids[sl], part.dense[sl])
    return model.loss(cache, part.labels[sl])


def train(plan, dataset, scheduler: Scheduler | None = None, seed: int = 0,
          config: TrainConfig = TrainConfig(), nearest: bool = False) -> TrainResult:
    """Build the plan's store, train it with DlrmLite, freeze it and report.

    ``nearest`` lets an infeasible plan train at its nearest reachable size.
    """
    from ..stores import build_store

    scheduler = scheduler or Scheduler.for_method(plan.method)
    dtype = np.dtype(config.dtype)
    store = build_store(plan, dataset.space, config.d, seed=seed, dtype=dtype, nearest=nearest)
    model = DlrmLite(dataset.space.k, config.d, dataset.dense_dim, hidden=config.hidden, seed=seed + 1,
                     dtype=dtype)
    opt = make_optimizer(config.optimizer, config.lr)
    n_train = int(np.count_nonzero(dataset.split == 0))
    steps_per_epoch = max(1, math.ceil(n_train / config.batch_size))
    eval_interval = max(1, round(config.eval_every * steps_per_epoch))
    observe = getattr(store, "observe_and_promote", None)
    breakdown = []
    start = time.perf_counter()

    for si, stage in enumerate(scheduler.stages):
        stage_start = time.perf_counter()
        total = max(1, math.ceil(stage.epochs * steps_per_epoch))
        best_auc, best_state, stale, step, stopped = -1.0, None, 0, 0, False
        epoch = 0
        while step < total and not stopped:
            rng = np.random.default_rng([seed, si, epoch])
            for batch in dataset.batches("train", config.batch_size, rng):
                opt.tick()
                if observe is not None:
                    observe(batch.ids.ravel())
                _, cache = model.forward(store, batch.ids, batch.dense)
                grads, emb_grads = model.backward(cache, batch.labels)
                model.apply_gradients(grads, opt)
                store.apply_gradients(batch.ids.ravel(), emb_grads, opt)
                step += 1
                if stage.kind == "compress" and (step % config.prune_every == 0 or step == total):
                    store.prune_step(position=step / total)
                if step % eval_interval == 0 or step == total:
                    score = evaluate(model, store, dataset, "val", config.eval_batch)
                    if score > best_auc:
                        best_auc, stale = score, 0
                        if stage.early_stop:
                            best_state = copy.deepcopy((store, model, opt.t))
                    else:
                        stale += 1
                        if stage.early_stop and stale >= stage.patience:
                            stopped = True
                if step >= total or stopped:
                    break
            epoch += 1
        if best_state is not None:
            store, model, _ = best_state
            observe = getattr(store, "observe_and_promote", None)
        breakdown.append({"stage": stage.kind, "epochs": step / steps_per_epoch, "steps": step,
                          "early_stopped": stopped, "best_val_auc": best_auc,
                          "seconds": time.perf_counter() - stage_start})

    store.freeze()
    # after freezing so codec-backed stores know their codec size
    train_bytes = store.training_bytes()
    seconds = time.perf_counter() - start
    base = baseline_bytes(dataset.space, config.d)
    report = {
        "auc": evaluate(model, store, dataset, "val", config.eval_batch),
        "test_auc": evaluate(model, store, dataset, "test", config.eval_batch),
        "inference_bytes": int(store.inference_bytes()),
        "training_bytes": int(train_bytes),
        "baseline_bytes": int(base),
        "train_mem_pct": 100.0 * train_bytes / base,
        "train_seconds": seconds,
        "stage_breakdown": breakdown,
        "seed": seed,
        "plan": plan.to_dict(),
        "config": asdict(config),
    }
    return TrainResult(store, model, report)
