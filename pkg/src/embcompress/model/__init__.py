"""DLRM-lite model, optimizers and the staged trainer."""

from .dlrm import DlrmLite, ForwardCache, bce_from_logits, sigmoid
from .optim import SGD, Adam, coalesce, make_optimizer
from .train import Scheduler, Stage, TrainConfig, TrainResult, evaluate, train, train_loss

__all__ = [
    "Adam",
    "DlrmLite",
    "ForwardCache",
    "SGD",
    "Scheduler",
    "Stage",
    "TrainConfig",
    "TrainResult",
    "bce_from_logits",
    "coalesce",
    "evaluate",
    "make_optimizer",
    "sigmoid",
    "train",
    "train_loss",
]
