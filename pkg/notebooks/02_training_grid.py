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
# # Training compressed tables
#
# This walks through a small version of the training benchmark. The data
# is synthetic with Zipf-skewed feature ids, so a handful of rows carry
# most of the traffic. That skew is what makes hashing tolerable.

# %%
from embcompress.budget import solve
from embcompress.data import SyntheticSpec, generate, skew_summary
from embcompress.eval import render_text, time_batch
from embcompress.model import Scheduler, TrainConfig, train

data = generate(SyntheticSpec(samples=20_000, seed=0))
skew_summary(data)

# %% [markdown]
# ## One cell
#
# A cell is a method at a budget. Training returns the fitted model and
# store plus a report with validation AUC and the memory accounting.

# %%
config = TrainConfig(d=16)
plan = solve("double_hash", 0.1, data.space, 16)
result = train(plan, data, Scheduler.for_method("double_hash", epochs=1.0), seed=0, config=config)
{k: result.report[k] for k in ("auc", "inference_bytes", "training_bytes", "train_mem_pct")}

# %% [markdown]
# ## A small grid
#
# Cells that cannot meet their budget still train, at the nearest size the
# method supports, and carry that size as a label.

# %%
records = []
for method in ("full", "double_hash", "robe", "int8_16", "deeplight"):
    for beta in (0.5, 0.01):
        plan = solve(method, beta, data.space, 16)
        sched = Scheduler.for_method(method, epochs=1.0)
        fitted = train(plan, data, sched, seed=0, config=config, nearest=True)
        latency = time_batch(fitted.store, data.ids[:1024].ravel())
        records.append(dict(fitted.report, method=method, budget=beta, stage="train",
                            label=plan.cell_label(), latency_seconds=latency))
print(render_text(records))

# %% [markdown]
# Pruning keeps a dense shadow and its moments during training, so its
# training memory sits slightly above the full table even though the
# frozen table is much smaller.
