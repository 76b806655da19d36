"""Embedding-table compression: trainable stores, post-training codecs,
a memory-budget solver and a small benchmark harness."""

__version__ = "0.1.0"
