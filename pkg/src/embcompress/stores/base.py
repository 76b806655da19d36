"""Common contract for trainable compressed embedding layers."""

from __future__ import annotations

import numpy as np

from ..core.checkpoint import Container
from ..core.errors import InvalidArgument, StateError, check_ids

DEFAULT_INIT_STD = 0.05


class EmbeddingStore:
    """Maps feature ids in ``[0, n)`` to width-``d`` vectors.

    Subclasses implement ``_lookup`` and ``_grads``. ``_grads`` returns, per
    parameter name, either ``(None, dense_grad)`` or ``(rows, row_grads)``
    where ``rows`` index the first axis of the parameter.
    """

    kind = "abstract"

    def __init__(self, n: int, d: int, dtype=np.float32):
        if n < 1 or d < 1:
            raise InvalidArgument(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        self.n = int(n)
        self.d = int(d)
        self.dtype = np.dtype(dtype)
        self.frozen = False
        self._slots: dict[str, dict] = {}

    # -- lookup -------------------------------------------------------------

    def lookup(self, ids) -> np.ndarray:
        ids = check_ids(ids, self.n).ravel()
        return self._lookup(ids)

    def _lookup(self, ids: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- training -----------------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Continuous trainable arrays (views, not copies)."""
        return {}

    def _grads(self, ids: np.ndarray, grads: np.ndarray) -> dict:
        raise NotImplementedError

    def parameter_grads(self, ids, grads) -> dict[str, np.ndarray]:
        """Dense gradient of ``sum(grads * lookup(ids))`` w.r.t. every parameter."""
        ids = check_ids(ids, self.n).ravel()
        grads = self._check_grads(ids, grads)
        params = self.parameters()
        dense = {name: np.zeros_like(p) for name, p in params.items()}
        for name, (rows, g) in self._grads(ids, grads).items():
            if rows is None:
                dense[name] += g
            else:
                np.add.at(dense[name], rows, g)
        return dense

    def _check_grads(self, ids: np.ndarray, grads) -> np.ndarray:
        grads = np.asarray(grads)
        if grads.ndim != 2 or grads.shape != (ids.size, self.d):
            raise InvalidArgument(
                f"gradient shape {grads.shape} does not match ({ids.size}, {self.d})"
            )
        return grads.astype(self.dtype, copy=False)

    def _begin_update(self, ids, grads) -> tuple[np.ndarray, np.ndarray]:
        if self.frozen:
            raise StateError(f"{type(self).__name__} is frozen")
        ids = check_ids(ids, self.n).ravel()
        return ids, self._check_grads(ids, grads)

    def apply_gradients(self, ids, grads, opt) -> None:
        ids, grads = self._begin_update(ids, grads)
        params = self.parameters()
        for name, (rows, g) in self._grads(ids, grads).items():
            opt.update(params[name], g, self._slots.setdefault(name, {}), rows)

    # -- freezing and accounting ------------------------------------------------

    def freeze(self) -> "EmbeddingStore":
        self.frozen = True
        self._slots = {}
        return self

    def inference_bytes(self) -> int:
        raise NotImplementedError

    def parameter_bytes(self) -> int:
        """Bytes of the parameters carrying optimizer moments during training."""
        return self.inference_bytes()

    def auxiliary_bytes(self) -> int:
        return 0

    def training_bytes(self, moments: int = 2) -> int:
        """Parameters, FP32 optimizer moments and auxiliary training structures."""
        return self.inference_bytes() + moments * self.parameter_bytes() + self.auxiliary_bytes()

    # -- serialization ------------------------------------------------------------

    def _meta(self) -> dict:
        return {"n": self.n, "d": self.d}

    def _arrays(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def to_container(self) -> Container:
        return Container(self.kind, self._meta(), self._arrays())

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, d={self.d}, frozen={self.frozen})"


def normal_init(rng: np.random.Generator, shape, std: float, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * std).astype(dtype)
