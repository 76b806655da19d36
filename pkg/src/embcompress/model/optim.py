"""Dense and row-sparse SGD / Adam updates on numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def coalesce(rows: np.ndarray, grads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum gradient rows that hit the same parameter row."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    uniq, inv = np.unique(rows, return_inverse=True)
    if uniq.size == rows.size:
        order = np.argsort(rows, kind="stable")
        return rows[order], grads[order]
    out = np.zeros((uniq.size,) + grads.shape[1:], dtype=grads.dtype)
    np.add.at(out, inv, grads)
    return uniq, out


@dataclass
class SGD:
    lr: float = 0.01
    t: int = 0

    moments_per_param = 0

    def tick(self) -> None:
        self.t += 1

    def update(self, param: np.ndarray, grad: np.ndarray, slot: dict, rows=None) -> None:
        if rows is None:
            param -= (self.lr * grad).astype(param.dtype, copy=False)
        else:
            rows, grad = coalesce(rows, grad)
            param[rows] -= (self.lr * grad).astype(param.dtype, copy=False)

    def delta(self, grad: np.ndarray, slot: dict, rows=None, shape=None) -> np.ndarray:
        return -self.lr * grad


@dataclass
class Adam:
    """Adam with lazy row updates: untouched rows keep their moments."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    moments_per_param = 2

    def tick(self) -> None:
        self.t += 1

    def _slots(self, slot: dict, shape, dtype):
        if "m" not in slot:
            slot["m"] = np.zeros(shape, dtype=dtype)
            slot["v"] = np.zeros(shape, dtype=dtype)
        return slot["m"], slot["v"]

    def delta(self, grad: np.ndarray, slot: dict, rows=None, shape=None) -> np.ndarray:
        """Advance the moments and return the step (to be added to the parameter).

        With ``rows`` the gradient must already be coalesced and ``shape`` is
        the full parameter shape.
        """
        t = max(self.t, 1)
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        if rows is None:
            m, v = self._slots(slot, grad.shape, grad.dtype)
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            return -(self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
        m, v = self._slots(slot, shape, grad.dtype)
        mr = self.beta1 * m[rows] + (1.0 - self.beta1) * grad
        vr = self.beta2 * v[rows] + (1.0 - self.beta2) * grad * grad
        m[rows] = mr
        v[rows] = vr
        return -(self.lr / bc1) * mr / (np.sqrt(vr / bc2) + self.eps)

    def update(self, param: np.ndarray, grad: np.ndarray, slot: dict, rows=None) -> None:
        if rows is None:
            param += self.delta(grad, slot).astype(param.dtype, copy=False)
        else:
            rows, grad = coalesce(rows, grad)
            param[rows] += self.delta(grad, slot, rows, param.shape).astype(param.dtype, copy=False)


def make_optimizer(kind: str = "adam", lr: float = 1e-3):
    if kind == "adam":
        return Adam(lr=lr)
    if kind == "sgd":
        return SGD(lr=lr)
    raise ValueError(f"unknown optimizer {kind!r}")
