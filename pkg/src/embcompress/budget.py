"""Turn (method, budget fraction, feature space, width) into concrete hyperparameters.

Every byte count here is a prediction from the memory model; building and
freezing the store or codec reproduces it (up to data-dependent slack for
Dedup, which only guarantees the upper bound).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core.errors import InvalidArgument
from .core.features import FeatureSpace
from .core.memory import F32, INDEX, baseline_bytes, index_width, max_sparse_nnz, percent_label, sparse_bytes
from .posttrain.dedup import block_count
from .posttrain.pq import group_sizes
from .posttrain.svd import group_ranks
from .posttrain.tt import TtCodec
from .stores.mde import mde_bytes, mixed_dims

MAGPQ_GROUPS = 4
PQ_MAX_CENTROIDS = 256
MAGSVD_GROUPS = 4
TT_RANK_CAP = 32
MDE_ALPHA = 0.3
ADAPT_THRESHOLD = 10
ADAPT_EXCLUSIVE_SHARE = 0.5
ROBE_CHUNK = 4
DEDUP_PROJECTIONS = 4


@dataclass
class CompressionPlan:
    """Solved hyperparameters for one (method, budget) cell.

    ``achieved_bytes`` is the predicted frozen size. For an infeasible plan it
    is the nearest size the method can reach, and ``params`` describe that
    configuration.
    """

    method: str
    beta: float
    params: dict = field(default_factory=dict)
    target_bytes: int = 0
    achieved_bytes: int = 0
    baseline_bytes: int = 0
    feasible: bool = True
    stage: str = "train"

    @property
    def ratio(self) -> float:
        return self.achieved_bytes / self.baseline_bytes

    def cell_label(self) -> str:
        """Grid annotation: empty when feasible, otherwise the reachable ratio."""
        if self.feasible:
            return ""
        if self.achieved_bytes <= 0:
            return "/"
        return f"({percent_label(self.achieved_bytes, self.baseline_bytes)})"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = _plain(self.params)
        return out

    def to_kv(self) -> str:
        """Human-readable ``key = value`` block for run configs."""
        lines = [f"method = {self.method}", f"beta = {self.beta!r}", f"stage = {self.stage}",
                 f"feasible = {str(self.feasible).lower()}", f"target_bytes = {self.target_bytes}",
                 f"achieved_bytes = {self.achieved_bytes}"]
        lines += [f"param.{k} = {v}" for k, v in sorted(_plain(self.params).items())]
        return "\n".join(lines)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _space(space) -> FeatureSpace:
    return space if isinstance(space, FeatureSpace) else FeatureSpace((int(space),))


def _plan(method, beta, base, target, achieved, params, feasible=None, stage="train"):
    if feasible is None:
        feasible = 0 < achieved <= target
    return CompressionPlan(method, float(beta), params, int(target), int(achieved), int(base),
                           bool(feasible), stage)


def _largest(lo: int, hi: int, fits) -> int | None:
    """Largest integer in [lo, hi] with ``fits`` true, assuming monotone; None if none."""
    if hi < lo or not fits(lo):
        return None
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _discrete(method, beta, base, target, options, stage):
    """Nearest option by distance to the requested ratio (ties go to the
    smaller one); feasible only when it is within the budget."""
    ratios = [b / base for b, _ in options]
    best = min(range(len(options)), key=lambda i: (abs(ratios[i] - beta), ratios[i]))
    nbytes, params = options[best]
    return _plan(method, beta, base, target, nbytes, params, stage=stage)


# -- per-method byte formulas ---------------------------------------------------


def tt_rec_bytes(row_factors, col_factors, ranks) -> int:
    full = [1] + list(ranks) + [1]
    return sum(full[k] * row_factors[k] * col_factors[k] * full[k + 1] for k in range(len(row_factors))) * F32


def balanced_row_factors(n: int, t: int) -> list[int]:
    """``t`` near-equal factors whose product covers ``n``."""
    base = max(1, math.ceil(n ** (1.0 / t) - 1e-9))
    factors = [base] * t
    while math.prod(factors) < n:
        factors[factors.index(min(factors))] += 1
    for i in range(t):
        while factors[i] > 1 and math.prod(factors) // factors[i] * (factors[i] - 1) >= n:
            factors[i] -= 1
    return factors


def col_factors(d: int, t: int) -> list[int]:
    """Split ``d`` into ``t`` factors, largest first, as balanced as divisibility allows."""
    out, rest = [], d
    for k in range(t, 0, -1):
        target = round(rest ** (1.0 / k))
        best = min((f for f in range(1, rest + 1) if rest % f == 0), key=lambda f: (abs(f - target), -f))
        out.append(best)
        rest //= best
    return sorted(out, reverse=True)


def magsvd_sizes(n: int, groups: int) -> list[int]:
    return [int(v) for v in np.bincount(np.arange(n) * groups // n, minlength=groups)]


def adaptive_bytes(m: int, capacity: int, d: int) -> int:
    return (m + capacity) * d * F32 + capacity * INDEX


def dedup_plan_params(n, d, target):
    """Smallest row-aligned block width whose mapping fits half the budget,
    provided at least one representative fits in the rest."""
    divisors = [w for w in range(1, d + 1) if d % w == 0]
    for w in divisors:
        nb = block_count(n, d, w)
        if nb * INDEX <= target / 2 and target - nb * INDEX >= w * F32:
            return w
    # row multiples: mapping shrinks as 1/w, so start where it first fits
    k = max(2, math.ceil(2 * n * INDEX / max(target, 1)))
    while k <= n:
        w = d * k
        nb = block_count(n, d, w)
        if nb * INDEX <= target / 2 and target - nb * INDEX >= w * F32:
            return w
        if w * F32 > target:
            return None
        k += 1
    return None


def dedup_ceiling(n, d, width, target) -> int:
    """Largest dedup payload under ``target``: the mapping plus as many whole
    representatives as fit. The fitted size depends on the data and can only
    fall short of this by the merges the bucket search overshoots."""
    nb = block_count(n, d, width)
    unique = (target - nb * INDEX) // (width * F32)
    return nb * INDEX + unique * width * F32


def dedup_min_bytes(n, d) -> int:
    return dedup_smallest(n, d)[0]


def dedup_smallest(n, d) -> tuple[int, int]:
    """``(bytes, width)`` of the smallest dedup layout: one representative."""
    return min((block_count(n, d, w) * INDEX + w * F32, w) for w in _dedup_candidates(n, d))


def _dedup_candidates(n, d):
    divisors = [w for w in range(1, d + 1) if d % w == 0]
    k_star = max(2, int(math.sqrt(n / d)))
    multiples = {d * k for k in range(max(2, k_star - 3), k_star + 4) if k <= n}
    multiples |= {d * k for k in (2, n) if k >= 2}
    return divisors + sorted(multiples)


def _best_pq(n, d, target, magnitude: bool):
    """Best ``(bytes, parts, k)`` under ``target`` plus the cheapest layout.

    Codebooks are capped at one-byte codes, so a bigger budget buys more
    parts rather than more centroids. Among fitting layouts the one with
    the most code bits per row wins, then the smaller one.
    """
    best, best_key, cheapest = None, None, None
    for parts in (p for p in range(1, d + 1) if d % p == 0):
        k = 1
        while True:
            total = sum(group_sizes(k, MAGPQ_GROUPS)) if magnitude else k
            if total > min(n, PQ_MAX_CENTROIDS):
                break
            nbytes = n * parts * index_width(total) + total * d * F32
            cand = (nbytes, parts, k)
            key = (parts * math.log2(total), -nbytes)
            if nbytes <= target and (best_key is None or key > best_key):
                best, best_key = cand, key
            if cheapest is None or cand < cheapest:
                cheapest = cand
            k *= 2
    return best, cheapest


# -- solver --------------------------------------------------------------------


def solve(method: str, beta: float, space, d: int, stage: str = "train", **options) -> CompressionPlan:
    """Plan for ``method`` under a budget of ``beta`` times the FP32 baseline.

    ``stage`` selects the training-time store family or the post-training
    codec family (the method tags overlap). ``space`` may be a plain row
    count for post-training plans.
    """
    if not 0 < beta <= 1:
        raise InvalidArgument(f"budget fraction must lie in (0, 1], got {beta}")
    space = _space(space)
    n = space.n
    base = baseline_bytes(n, d)
    target = math.floor(beta * base + 1e-9)
    table = _TRAIN if stage == "train" else _POST if stage == "posttrain" else None
    if table is None:
        raise InvalidArgument(f"unknown stage {stage!r}")
    try:
        fn = table[method]
    except KeyError:
        raise InvalidArgument(f"unknown {stage} method {method!r}") from None
    plan = fn(method=method, beta=beta, space=space, n=n, d=d, base=base, target=target, **options)
    plan.stage = stage
    return plan


def _full(method, beta, n, d, base, target, **_):
    return _plan(method, beta, base, target, base, {})


def _identity(method, beta, n, d, base, target, **_):
    # the uncompressed reference row of the post-training grid
    return _plan(method, beta, base, target, base, {}, feasible=True)


def _hashed(method, beta, n, d, base, target, **_):
    m = max(1, min(n, target // (d * F32)))
    return _plan(method, beta, base, target, m * d * F32, {"m": m})


def _compo(method, beta, n, d, base, target, **_):
    rows = target // (d * F32)
    if rows < 2:
        return _plan(method, beta, base, target, 2 * d * F32, {"m1": 1, "m2": 1}, feasible=False)
    m1 = np.arange(1, rows, dtype=np.int64)
    ok = m1 + -(-n // m1) <= rows
    if ok.any():
        a = int(m1[ok].max())
        b = rows - a
    else:
        # too small for a collision-free split: keep the sizes balanced
        a = -(-rows // 2)
        b = rows - a
    return _plan(method, beta, base, target, (a + b) * d * F32, {"m1": a, "m2": b})


def _memcom(method, beta, n, d, base, target, **_):
    m = (target - 2 * n * F32) // (d * F32)
    m = max(1, min(int(m), n))
    return _plan(method, beta, base, target, m * d * F32 + 2 * n * F32, {"m": m})


def _robe(method, beta, n, d, base, target, chunk=ROBE_CHUNK, **_):
    chunk = chunk if d % chunk == 0 else 1
    size = max(1, min(target // F32, n * d))
    return _plan(method, beta, base, target, size * F32, {"size": size, "chunk": chunk})


def _tt_rec(method, beta, n, d, base, target, rank_cap=TT_RANK_CAP, **_):
    best = None
    for t in (2, 3):
        rows = balanced_row_factors(n, t)
        cols = col_factors(d, t)
        cap = min(rank_cap, *(math.prod(rows[:k + 1]) * math.prod(cols[:k + 1]) for k in range(t - 1)))

        def fits(r, rows=rows, cols=cols, t=t):
            return tt_rec_bytes(rows, cols, [r] * (t - 1)) <= target

        r = _largest(1, cap, fits)
        params = {"row_factors": rows, "col_factors": cols}
        if r is not None:
            params["ranks"] = [r] * (t - 1)
            return _plan(method, beta, base, target, tt_rec_bytes(rows, cols, params["ranks"]), params)
        nearest = tt_rec_bytes(rows, cols, [1] * (t - 1))
        if best is None or nearest < best[0]:
            best = (nearest, dict(params, ranks=[1] * (t - 1)))
    return _plan(method, beta, base, target, best[0], best[1], feasible=False)


def _dedup(method, beta, n, d, base, target, count=DEDUP_PROJECTIONS, **_):
    width = dedup_plan_params(n, d, target)
    if width is None:
        nbytes, w = dedup_smallest(n, d)
        codec = {"budget": nbytes, "width": w, "count": count}
        return _plan(method, beta, base, target, nbytes, {"codec": codec}, feasible=False)
    codec = {"budget": int(target), "width": width, "count": count}
    return _plan(method, beta, base, target, dedup_ceiling(n, d, width, target), {"codec": codec})


def _mgqe(method, beta, n, d, base, target, **_):
    best, cheapest = _best_pq(n, d, target, magnitude=True)
    if best is None:
        nb, parts, k = cheapest
        return _plan(method, beta, base, target, nb, {"codec": {"parts": parts, "base_k": k}}, feasible=False)
    nb, parts, k = best
    return _plan(method, beta, base, target, nb,
                 {"codec": {"parts": parts, "base_k": k, "groups": MAGPQ_GROUPS}})


def _adapt(method, beta, n, d, base, target, threshold=ADAPT_THRESHOLD, share=ADAPT_EXCLUSIVE_SHARE, **_):
    capacity = min(n, int(share * target) // (d * F32 + INDEX))
    m = (target - capacity * (d * F32 + INDEX)) // (d * F32)
    if m < 1:
        capacity, m = 0, max(1, target // (d * F32))
    m = min(int(m), n)
    return _plan(method, beta, base, target, adaptive_bytes(m, capacity, d),
                 {"m": m, "capacity": capacity, "threshold": threshold})


def _int8_16(method, beta, n, d, base, target, stage="train", **_):
    options = [(n * d * 2, {"bits": 16}), (n * d, {"bits": 8})]
    if stage == "posttrain":
        options = [(b, dict(p, granularity="table")) for b, p in options]
    return _discrete(method, beta, base, target, options, stage)


def _int8_16_post(**kw):
    return _int8_16(stage="posttrain", **kw)


def _fp16(method, beta, n, d, base, target, **_):
    return _discrete(method, beta, base, target, [(n * d * 2, {})], "train")


def _alpt(method, beta, n, d, base, target, **_):
    options = [(n * d * 2 + n * F32, {"bits": 16}), (n * d + n * F32, {"bits": 8})]
    return _discrete(method, beta, base, target, options, "train")


def _mde(method, beta, space, n, d, base, target, alpha=MDE_ALPHA, **_):
    cards = np.asarray(space.cardinalities, dtype=np.float64)
    weights = (1.0 / cards) ** alpha
    # every scale at which some field's width changes, plus the extremes
    cands = np.unique(np.concatenate([[0.0], ((np.arange(1, d + 1) - 0.5)[:, None] / weights).ravel(),
                                      [d / weights.min() + 1.0]]))
    best, cheapest = None, None
    for lam in cands:
        lam = float(np.nextafter(lam, np.inf))
        dims = mixed_dims(space.cardinalities, d, lam, alpha)
        nbytes = mde_bytes(space.cardinalities, dims, d)
        if nbytes <= target and (best is None or nbytes > best[0]):
            best = (nbytes, lam, dims)
        if cheapest is None or nbytes < cheapest[0]:
            cheapest = (nbytes, lam, dims)
    chosen, feasible = (best, True) if best is not None else (cheapest, False)
    nbytes, lam, dims = chosen
    return _plan(method, beta, base, target, nbytes,
                 {"dims": [int(v) for v in dims], "scale": lam, "alpha": alpha}, feasible=feasible)


def _deeplight(method, beta, n, d, base, target, **_):
    fmt, nnz = max_sparse_nnz(n, d, target)
    if nnz < 1:
        return _plan(method, beta, base, target, sparse_bytes(n, d, 1)[1], {"nnz": 1, "density": 1 / (n * d)},
                     feasible=False)
    nbytes = sparse_bytes(n, d, nnz)[1]
    return _plan(method, beta, base, target, nbytes, {"nnz": nnz, "density": nnz / (n * d), "format": fmt})


def _tt_post(method, beta, n, d, base, target, **_):
    dims = TtCodec.modes(n, d)
    full = max(dims[0] * dims[1], dims[2] * dims[3])
    r = _largest(1, full, lambda r: TtCodec.predict_bytes(n, d, r) <= target)
    if r is None:
        return _plan(method, beta, base, target, TtCodec.predict_bytes(n, d, 1), {"max_rank": 1}, feasible=False)
    return _plan(method, beta, base, target, TtCodec.predict_bytes(n, d, r), {"max_rank": r})


def _dedup_post(method, beta, n, d, base, target, count=DEDUP_PROJECTIONS, **_):
    width = dedup_plan_params(n, d, target)
    if width is None:
        nbytes, w = dedup_smallest(n, d)
        params = {"budget": nbytes, "width": w, "count": count}
        return _plan(method, beta, base, target, nbytes, params, feasible=False)
    params = {"budget": int(target), "width": width, "count": count}
    return _plan(method, beta, base, target, dedup_ceiling(n, d, width, target), params)


def _pq_post(method, beta, n, d, base, target, **_):
    best, cheapest = _best_pq(n, d, target, magnitude=False)
    nb, parts, k = best if best is not None else cheapest
    return _plan(method, beta, base, target, nb, {"parts": parts, "K": k}, feasible=best is not None)


def _magpq_post(method, beta, n, d, base, target, **_):
    best, cheapest = _best_pq(n, d, target, magnitude=True)
    nb, parts, k = best if best is not None else cheapest
    return _plan(method, beta, base, target, nb, {"parts": parts, "base_k": k, "groups": MAGPQ_GROUPS},
                 feasible=best is not None)


def _svd_post(method, beta, n, d, base, target, **_):
    per_rank = (n + d) * F32
    r = min(target // per_rank, min(n, d))
    if r < 1:
        return _plan(method, beta, base, target, 0, {"rank": 1}, feasible=False)
    return _plan(method, beta, base, target, r * per_rank, {"rank": int(r)})


def _magsvd_post(method, beta, n, d, base, target, groups=MAGSVD_GROUPS, **_):
    sizes = magsvd_sizes(n, groups)

    def cost(scale):
        ranks = group_ranks(scale, groups, sizes, d)
        return n + sum((s + d) * r for s, r in zip(sizes, ranks)) * F32, ranks

    hi_scale = float(d) + 1.0
    if cost(1.0 / 2 ** (groups - 1))[0] > target:
        # not even rank 1 in the top group fits
        return _plan(method, beta, base, target, 0, {"ranks": [0] * (groups - 1) + [1]}, feasible=False)
    lo, hi = 1.0 / 2 ** (groups - 1), hi_scale
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if cost(mid)[0] <= target:
            lo = mid
        else:
            hi = mid
    nbytes, ranks = cost(lo)
    return _plan(method, beta, base, target, nbytes, {"ranks": ranks})


def _prune_post(method, beta, n, d, base, target, **_):
    fmt, nnz = max_sparse_nnz(n, d, target)
    nnz = min(nnz, n * d)
    if nnz < 1:
        return _plan(method, beta, base, target, 0, {"nnz": 0}, feasible=False)
    return _plan(method, beta, base, target, sparse_bytes(n, d, nnz)[1], {"nnz": nnz})


_TRAIN = {
    "full": _full,
    "double_hash": _hashed,
    "compo": _compo,
    "memcom": _memcom,
    "robe": _robe,
    "tt_rec": _tt_rec,
    "dedup": _dedup,
    "mgqe": _mgqe,
    "adapt": _adapt,
    "int8_16": _int8_16,
    "fp16": _fp16,
    "alpt": _alpt,
    "mde": _mde,
    "deeplight": _deeplight,
}

_POST = {
    "identity": _identity,
    "tt": _tt_post,
    "dedup": _dedup_post,
    "pq": _pq_post,
    "magpq": _magpq_post,
    "int8_16": _int8_16_post,
    "svd": _svd_post,
    "magsvd": _magsvd_post,
    "prune": _prune_post,
}

TRAIN_METHODS = tuple(_TRAIN)
POSTTRAIN_METHODS = tuple(_POST)


def feasible_range(method: str, space, d: int, stage: str = "train"):
    """``(min_bytes, max_bytes, discrete_ratios)``; ratios is None for continuous methods."""
    space = _space(space)
    n = space.n
    base = baseline_bytes(n, d)
    discrete = {
        "int8_16": [0.5, 0.25],
        "fp16": [0.5],
        "alpt": [(2 * d + F32) / (F32 * d), (d + F32) / (F32 * d)],
    }
    if method in discrete and not (stage == "posttrain" and method != "int8_16"):
        ratios = discrete[method]
        return int(min(ratios) * base), int(max(ratios) * base), ratios
    if method in ("full", "identity"):
        return base, base, [1.0]
    low = solve(method, 1e-12, space, d, stage=stage)
    high = solve(method, 1.0, space, d, stage=stage)
    lo_bytes = low.achieved_bytes if low.achieved_bytes > 0 else None
    if lo_bytes is None:
        lo_bytes = _smallest_post(method, n, d)
    return int(lo_bytes), int(high.achieved_bytes), None


def _smallest_post(method, n, d):
    if method == "svd":
        return (n + d) * F32
    if method == "magsvd":
        sizes = magsvd_sizes(n, MAGSVD_GROUPS)
        return n + (sizes[-1] + d) * F32
    if method == "prune":
        return sparse_bytes(n, d, 1)[1]
    return 0
