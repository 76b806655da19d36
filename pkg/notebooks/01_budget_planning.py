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
# # Planning a memory budget
#
# Every compression method exposes a few size knobs: a hash table width, a
# set of TT ranks, a codebook size. The planner turns a budget fraction of
# the FP32 table into concrete knob values and predicts the frozen size.
# Some methods can only reach a fixed set of ratios. For those the grid
# shows the nearest reachable ratio in parentheses.

# %%
import numpy as np

from embcompress.budget import TRAIN_METHODS, feasible_range, solve
from embcompress.core import FeatureSpace

space = FeatureSpace((50_000, 30_000, 15_000, 5_000))
d = 16
budgets = (0.5, 0.1, 0.01, 0.001)

# %% [markdown]
# ## The grid of plans
#
# A cell is blank when the plan fits. Otherwise it shows what the method
# would actually use.

# %%
width = max(map(len, TRAIN_METHODS))
print(" " * width, *(f"{100 * b:>8g}%" for b in budgets))
for method in TRAIN_METHODS:
    cells = []
    for beta in budgets:
        plan = solve(method, beta, space, d)
        cells.append(f"{plan.cell_label() or 'ok':>9}")
    print(f"{method:<{width}}", *cells)

# %% [markdown]
# Quantized tables are the clearest case. INT8 stores a quarter of the
# FP32 bytes, so no budget below 25% can be met. ALPT keeps a float scale
# per row on top of its codes, which is why its ratios land at 56.3% and
# 31.3% rather than 50% and 25%.

# %%
for method in ("int8_16", "fp16", "alpt"):
    lo, hi, ratios = feasible_range(method, space, d)
    print(method, [f"{100 * r:.2f}%" for r in ratios])

# %% [markdown]
# ## Knobs behind a plan
#
# TT-Rec factors the row count and the width, then picks the largest rank
# that fits.

# %%
for beta in budgets:
    plan = solve("tt_rec", beta, space, d)
    print(f"{100 * beta:g}%", plan.params["ranks"], f"{100 * plan.ratio:.3f}% used")

# %% [markdown]
# Mixed dimensions shrink the width of rare fields first, following a
# power law in field size.

# %%
plan = solve("mde", 0.1, space, d)
print(plan.params["dims"], f"{100 * plan.ratio:.2f}% used")
print(np.array(space.cardinalities))
