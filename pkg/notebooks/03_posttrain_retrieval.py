# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Compressing a trained matrix
#
# Post-training codecs take a finished embedding matrix and shrink it. We
# judge them by retrieval: how many of the exact top-10 inner-product
# neighbours survive compression.

# %%
import numpy as np

from embcompress.budget import solve
from embcompress.eval import recall_overlap
from embcompress.posttrain import compress

rng = np.random.default_rng(0)
matrix = rng.standard_normal((10_000, 64)).astype(np.float32)
queries = rng.standard_normal((100, 64))

# %% [markdown]
# ## Recall against budget
#
# A slash means the codec has no configuration that small.

# %%
for method in ("int8_16", "svd", "pq", "prune", "tt"):
    row = []
    for beta in (0.5, 0.25, 0.1, 0.01):
        plan = solve(method, beta, matrix.shape[0], matrix.shape[1], stage="posttrain")
        if not plan.feasible:
            row.append(plan.cell_label() or "/")
            continue
        codec, nbytes, _ = compress(matrix, plan, seed=0)
        row.append(f"{recall_overlap(matrix, codec, queries, 10):.3f}")
    print(f"{method:<8}", *(f"{c:>9}" for c in row))

# %% [markdown]
# Gaussian data has no low-rank structure, so SVD loses recall quickly
# while quantization barely notices. Real embedding tables are usually
# far more compressible by rank.

# %%
u, s, vt = np.linalg.svd(matrix, full_matrices=False)
energy = np.cumsum(s ** 2) / np.sum(s ** 2)
print("rank for 90% of the energy:", int(np.searchsorted(energy, 0.9)) + 1)
