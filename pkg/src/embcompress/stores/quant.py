"""Low-precision embedding stores: INT8/16, FP16 and ALPT.

All three train through a straight-through view: the touched rows are
dequantized, the optimizer step is applied in FP32 (optimizer moments stay
FP32), and the result is rounded back into low precision.
"""

from __future__ import annotations

import numpy as np

from ..core.errors import InvalidArgument
from ..core.memory import F16, F32
from ..model.optim import coalesce
from .base import DEFAULT_INIT_STD, EmbeddingStore, normal_init

_INT_DTYPES = {8: np.int8, 16: np.int16}


def int_range(bits: int, symmetric: bool = False) -> tuple[int, int]:
    if bits not in _INT_DTYPES:
        raise InvalidArgument(f"unsupported integer width {bits}")
    hi = (1 << (bits - 1)) - 1
    return (-hi if symmetric else -hi - 1), hi


def stochastic_round(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Round down or up with probability proportional to proximity."""
    lo = np.floor(x)
    return lo + (rng.random(x.shape) < (x - lo))


def round_values(x, rounding: str, rng) -> np.ndarray:
    if rounding == "nearest":
        return np.rint(x)
    if rounding == "stochastic":
        return stochastic_round(x, rng)
    raise InvalidArgument(f"unknown rounding mode {rounding!r}")


def quantize(values, scale, bias, bits: int, rounding: str = "nearest", rng=None,
             symmetric: bool = False) -> np.ndarray:
    """Integer codes ``q`` with ``q * scale + bias ~= values``, clipped to the type range."""
    lo, hi = int_range(bits, symmetric)
    x = (np.asarray(values, dtype=np.float64) - bias) / scale
    q = round_values(x, rounding, rng)
    return np.clip(q, lo, hi).astype(_INT_DTYPES[bits])


def dequantize(codes, scale, bias, dtype=np.float32) -> np.ndarray:
    return (codes.astype(dtype) * np.asarray(scale, dtype=dtype)) + np.asarray(bias, dtype=dtype)


def affine_params(values: np.ndarray, bits: int, axis=-1) -> tuple[np.ndarray, np.ndarray]:
    """Per-slice affine grid spanning ``[min, max]`` with equal intervals."""
    lo_q, hi_q = int_range(bits)
    vmin = np.min(values, axis=axis)
    vmax = np.max(values, axis=axis)
    scale = np.maximum((vmax - vmin) / (hi_q - lo_q), 1e-12)
    bias = vmin - lo_q * scale
    return scale.astype(np.float32), bias.astype(np.float32)


class QuantizedTable(EmbeddingStore):
    """INT8 / INT16 table with affine dequantization ``q * scale + bias``.

    ``granularity="row"`` keeps one scale/bias pair per feature, re-derived
    from the row's range on every write. ``granularity="table"`` keeps a
    single fixed pair covering ``[-clip, clip]``.
    """

    kind = "quantized"

    def __init__(self, n, d, bits=8, granularity="row", rounding="stochastic", clip=0.5,
                 seed=0, dtype=np.float32, init_std=DEFAULT_INIT_STD, scale=None, bias=None,
                 codes=None):
        super().__init__(n, d, dtype)
        if granularity not in ("row", "table"):
            raise InvalidArgument(f"unknown granularity {granularity!r}")
        int_range(bits)
        self.bits, self.granularity, self.rounding = int(bits), granularity, rounding
        self.clip = float(clip)
        self.rng = np.random.default_rng(seed + 7)
        rows = n if granularity == "row" else 1
        if codes is not None:
            self.codes = np.array(codes, dtype=_INT_DTYPES[bits])
            self.scale = np.array(scale, dtype=np.float32).reshape(rows)
            self.bias = np.array(bias, dtype=np.float32).reshape(rows)
            return
        init = normal_init(np.random.default_rng(seed), (n, d), init_std, np.float64)
        if granularity == "row":
            self.scale, self.bias = affine_params(init, bits)
        else:
            lo_q, hi_q = int_range(bits)
            s = 2 * self.clip / (hi_q - lo_q) if scale is None else float(scale)
            b = -self.clip - lo_q * s if bias is None else float(bias)
            self.scale = np.full(1, s, dtype=np.float32)
            self.bias = np.full(1, b, dtype=np.float32)
        self.codes = np.zeros((n, d), dtype=_INT_DTYPES[bits])
        self.write(np.arange(n), init, rounding="nearest")

    def _affine(self, ids):
        if self.granularity == "row":
            return self.scale[ids, None], self.bias[ids, None]
        return self.scale[0], self.bias[0]

    def _lookup(self, ids):
        s, b = self._affine(ids)
        return dequantize(self.codes[ids], s, b, self.dtype)

    def write(self, ids, values, rounding: str | None = None) -> None:
        """Quantize ``values`` into rows ``ids`` (unique ids expected)."""
        ids = np.asarray(ids, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if self.granularity == "row":
            s, b = affine_params(values, self.bits)
            self.scale[ids], self.bias[ids] = s, b
        s, b = self._affine(ids)
        self.codes[ids] = quantize(values, s, b, self.bits, rounding or self.rounding, self.rng)

    def parameters(self):
        return {"scale": self.scale, "bias": self.bias}

    def _grads(self, ids, grads):
        q = self.codes[ids].astype(self.dtype)
        rows = ids if self.granularity == "row" else np.zeros_like(ids)
        return {"scale": (rows, np.sum(grads * q, axis=1)), "bias": (rows, np.sum(grads, axis=1))}

    def apply_gradients(self, ids, grads, opt):
        ids, grads = self._begin_update(ids, grads)
        rows, g = coalesce(ids, grads)
        step = opt.delta(g.astype(np.float32), self._slots.setdefault("weight", {}), rows, (self.n, self.d))
        self.write(rows, self._lookup(rows).astype(np.float64) + step)

    def inference_bytes(self):
        # a per-table grid is two scalars kept in the metadata, like the shape
        affine = 2 * self.n * F32 if self.granularity == "row" else 0
        return self.codes.nbytes + affine

    def parameter_bytes(self):
        return self.n * self.d * F32

    def _meta(self):
        meta = {"n": self.n, "d": self.d, "bits": self.bits, "granularity": self.granularity,
                "rounding": self.rounding, "clip": self.clip}
        if self.granularity == "table":
            meta.update(scale=float(self.scale[0]), bias=float(self.bias[0]))
        return meta

    def _arrays(self):
        if self.granularity == "table":
            return {"codes": self.codes}
        return {"codes": self.codes, "scale": self.scale.astype(np.float32),
                "bias": self.bias.astype(np.float32)}

    @classmethod
    def from_container(cls, c):
        m, a = c.meta, c.arrays
        scale, bias = a.get("scale", m.get("scale")), a.get("bias", m.get("bias"))
        return cls(m["n"], m["d"], bits=m["bits"], granularity=m["granularity"], rounding=m["rounding"],
                   clip=m["clip"], codes=a["codes"], scale=scale, bias=bias).freeze()


def round_to_fp16(x: np.ndarray, rounding: str, rng) -> np.ndarray:
    near = x.astype(np.float16)
    if rounding == "nearest":
        return near
    nf = near.astype(np.float64)
    toward = np.where(nf < x, np.float16(np.inf), np.float16(-np.inf)).astype(np.float16)
    other = np.nextafter(near, toward)
    of = other.astype(np.float64)
    lo, hi = np.minimum(nf, of), np.maximum(nf, of)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_hi = np.where(hi > lo, (x - lo) / (hi - lo), 0.0)
    pick_hi = rng.random(x.shape) < p_hi
    out = np.where(pick_hi, np.maximum(near, other), np.minimum(near, other))
    return np.where(nf == x, near, out).astype(np.float16)


class Fp16Table(EmbeddingStore):
    """Half-precision storage; arithmetic happens in FP32."""

    kind = "fp16"

    def __init__(self, n, d, rounding="stochastic", seed=0, dtype=np.float32,
                 init_std=DEFAULT_INIT_STD, values=None):
        super().__init__(n, d, dtype)
        self.rounding = rounding
        self.rng = np.random.default_rng(seed + 7)
        if values is None:
            values = normal_init(np.random.default_rng(seed), (n, d), init_std, np.float32)
        self.values = np.asarray(values).astype(np.float16)

    def _lookup(self, ids):
        return self.values[ids].astype(self.dtype)

    def _grads(self, ids, grads):
        return {}

    def apply_gradients(self, ids, grads, opt):
        ids, grads = self._begin_update(ids, grads)
        rows, g = coalesce(ids, grads)
        step = opt.delta(g.astype(np.float32), self._slots.setdefault("weight", {}), rows, (self.n, self.d))
        new = self.values[rows].astype(np.float64) + step
        self.values[rows] = round_to_fp16(new, self.rounding, self.rng)

    def inference_bytes(self):
        return self.n * self.d * F16

    def parameter_bytes(self):
        return self.n * self.d * F32

    def _meta(self):
        return {"n": self.n, "d": self.d, "rounding": self.rounding}

    def _arrays(self):
        return {"values": self.values}

    @classmethod
    def from_container(cls, c):
        return cls(c.meta["n"], c.meta["d"], rounding=c.meta["rounding"], values=c.arrays["values"]).freeze()


class AlptTable(EmbeddingStore):
    """Low-precision table with a learnable per-row step size.

    Lookup is ``q * scale`` with symmetric integer codes. Training alternates
    a straight-through weight step with an LSQ-style step-size update, then
    re-rounds the weights stochastically onto the new grid.
    """

    kind = "alpt"

    def __init__(self, n, d, bits=8, rounding="stochastic", seed=0, dtype=np.float32,
                 init_std=DEFAULT_INIT_STD, codes=None, scale=None):
        super().__init__(n, d, dtype)
        self.bits = int(bits)
        self.qmax = int_range(self.bits, symmetric=True)[1]
        self.rounding = rounding
        self.rng = np.random.default_rng(seed + 7)
        if codes is not None:
            self.codes = np.array(codes, dtype=_INT_DTYPES[self.bits])
            self.scale = np.array(scale, dtype=self.dtype)
            return
        init = normal_init(np.random.default_rng(seed), (n, d), init_std, np.float64)
        self.scale = np.maximum(np.abs(init).max(axis=1) / self.qmax, 1e-8).astype(self.dtype)
        self.codes = quantize(init, self.scale[:, None], 0.0, self.bits, "nearest", symmetric=True)

    def _lookup(self, ids):
        return self.codes[ids].astype(self.dtype) * self.scale[ids, None]

    def parameters(self):
        return {"scale": self.scale}

    def _grads(self, ids, grads):
        return {"scale": (ids, np.sum(grads * self.codes[ids].astype(self.dtype), axis=1))}

    def lsq_scale_grad(self, weights, scale, grads) -> np.ndarray:
        """Step-size gradient of round(clip(w/s)) * s with the straight-through estimator."""
        u = weights / scale[:, None]
        inside = (u >= -self.qmax) & (u <= self.qmax)
        dq = np.where(inside, np.rint(u) - u, np.clip(u, -self.qmax, self.qmax))
        return np.sum(grads * dq, axis=1) / np.sqrt(self.d * self.qmax)

    def apply_gradients(self, ids, grads, opt):
        ids, grads = self._begin_update(ids, grads)
        rows, g = coalesce(ids, grads)
        g = g.astype(np.float32)
        w = self._lookup(rows).astype(np.float64)
        w = w + opt.delta(g, self._slots.setdefault("weight", {}), rows, (self.n, self.d))
        s = self.scale[rows].astype(np.float64)
        gs = self.lsq_scale_grad(w, s, g).astype(np.float32)
        s = s + opt.delta(gs, self._slots.setdefault("scale", {}), rows, (self.n,))
        s = np.maximum(s, 1e-8)
        self.scale[rows] = s
        self.codes[rows] = quantize(w, s[:, None], 0.0, self.bits, self.rounding, self.rng, symmetric=True)

    def inference_bytes(self):
        return self.codes.nbytes + self.n * F32

    def parameter_bytes(self):
        return self.n * self.d * F32 + self.n * F32

    def _meta(self):
        return {"n": self.n, "d": self.d, "bits": self.bits, "rounding": self.rounding}

    def _arrays(self):
        return {"codes": self.codes, "scale": self.scale.astype(np.float32)}

    @classmethod
    def from_container(cls, c):
        m, a = c.meta, c.arrays
        return cls(m["n"], m["d"], bits=m["bits"], rounding=m["rounding"], codes=a["codes"],
                   scale=a["scale"]).freeze()
