"""Stores whose frozen form is a post-training codec (MGQE, Dedup)."""

from __future__ import annotations

import numpy as np

from ..core.errors import StateError
from .tables import FullTable


class CodecStore(FullTable):
    """Trains as a plain full table; ``freeze`` compresses the weights with
    the configured codec and lookups then decode from it.

    With ``codec_in_training`` the codec's bytes are counted on top of the
    full table's 300% (the codebooks are maintained alongside the weights).
    """

    kind = "codec_store"

    def __init__(self, n, d, codec_method, codec_params=None, codec_in_training=False, seed=0,
                 dtype=np.float32, codec=None, **kw):
        if codec is not None:
            # frozen form: no weights are materialised
            self._init_frozen(n, d, codec_method, codec_params, codec_in_training, codec, dtype)
            return
        super().__init__(n, d, seed=seed, dtype=dtype, **kw)
        self.codec_method = codec_method
        self.codec_params = dict(codec_params or {})
        self.codec_in_training = bool(codec_in_training)
        self.seed = int(seed)
        self.codec = None
        self._codec_bytes = None

    def _init_frozen(self, n, d, method, params, in_training, codec, dtype):
        from .base import EmbeddingStore

        EmbeddingStore.__init__(self, n, d, dtype)
        self.codec_method, self.codec_params = method, dict(params or {})
        self.codec_in_training = bool(in_training)
        self.seed = 0
        self.codec, self.weight = codec, None
        self._codec_bytes = codec.nbytes()
        self.frozen = True

    def _lookup(self, ids):
        if self.codec is not None:
            return self.codec.decompress_batch(ids).astype(self.dtype, copy=False)
        return self.weight[ids]

    def parameters(self):
        return {} if self.weight is None else {"weight": self.weight}

    def freeze(self):
        if self.codec is None:
            from ..posttrain import fit_codec

            self.codec = fit_codec(self.codec_method, self.weight, self.codec_params, self.seed)
            self._codec_bytes = self.codec.nbytes()
            self.weight = None
        return super().freeze()

    def inference_bytes(self):
        if self.codec is None:
            raise StateError("codec bytes are known only after freeze")
        return self.codec.nbytes()

    def parameter_bytes(self):
        return self.n * self.d * 4

    def training_bytes(self, moments: int = 2) -> int:
        full = (1 + moments) * self.parameter_bytes()
        if self.codec_in_training:
            if self._codec_bytes is None:
                raise StateError("codec bytes are known only after freeze")
            full += self._codec_bytes
        return full

    def to_container(self):
        if self.codec is None:
            raise StateError("freeze the store before serializing")
        c = self.codec.to_container()
        c.meta = dict(c.meta, store_method=self.codec_method, codec_in_training=self.codec_in_training)
        return c

    @classmethod
    def from_codec_container(cls, c):
        from ..posttrain import codec_from_container

        codec = codec_from_container(c)
        meta = c.meta
        return cls(codec.n, codec.d, meta.get("store_method", c.kind),
                   codec_in_training=meta.get("codec_in_training", False), codec=codec)
