"""Seeded Lloyd k-means with k-means++ seeding."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

# above this many point-centroid pairs, seeding samples rows and assignment
# uses a k-d tree (PQ sub-vectors are narrow, where trees are fast)
LARGE_PROBLEM = 1 << 22
TREE_MAX_DIM = 16


def _sq_dists(x, c, x_sq=None):
    if x_sq is None:
        x_sq = np.einsum("ij,ij->i", x, x)
    d = x_sq[:, None] - 2.0 * (x @ c.T) + np.einsum("ij,ij->i", c, c)[None, :]
    return np.maximum(d, 0.0)


def assign(x, centroids, cells: int = 1 << 22) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid (lowest index on ties) and its squared distance.

    Rows are processed in blocks of about ``cells`` distance entries.
    """
    k = centroids.shape[0]
    if x.shape[0] * k > LARGE_PROBLEM and x.shape[1] <= TREE_MAX_DIM:
        # exact nearest neighbour; ties may resolve to any of the tied centroids
        dist, labels = cKDTree(centroids).query(x, k=1)
        return labels.astype(np.int64), dist ** 2
    chunk = max(1, cells // max(1, k))
    labels = np.empty(x.shape[0], dtype=np.int64)
    dist = np.empty(x.shape[0])
    for s in range(0, x.shape[0], chunk):
        d = _sq_dists(x[s:s + chunk], centroids)
        labels[s:s + chunk] = np.argmin(d, axis=1)
        dist[s:s + chunk] = d[np.arange(d.shape[0]), labels[s:s + chunk]]
    return labels, dist


def kmeans_pp(x, k, rng) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    closest = _sq_dists(x, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(x[idx])
        closest = np.minimum(closest, _sq_dists(x, x[idx][None, :])[:, 0])
    return np.array(centers)


def kmeans(x, k: int, seed: int = 0, iters: int = 25, tol: float = 1e-4):
    """Cluster the rows of ``x`` into ``k`` groups.

    Stops after ``iters`` Lloyd rounds or when the objective improves by less
    than ``tol`` relative. An empty cluster is re-seeded with the point
    farthest from its centroid. With ``k >= len(x)`` every point is its own
    centroid and the remainder are copies of the first point.

    Returns ``(centroids, labels, inertia)``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k >= n:
        cent = np.concatenate([x, np.repeat(x[:1], k - n, axis=0)])
        return cent, np.arange(n), 0.0
    rng = np.random.default_rng(seed)
    if n * k > LARGE_PROBLEM:
        # k-means++ is sequential in k; distinct random rows seed large problems
        cent = x[np.sort(rng.choice(n, size=k, replace=False))].copy()
    else:
        cent = kmeans_pp(x, k, rng)
    prev = np.inf
    for _ in range(iters):
        labels, dist = assign(x, cent)
        obj = dist.sum()
        counts = np.bincount(labels, minlength=k)
        sums = np.stack([np.bincount(labels, weights=x[:, j], minlength=k) for j in range(x.shape[1])], axis=1)
        nonempty = counts > 0
        cent[nonempty] = sums[nonempty] / counts[nonempty, None]
        for j in np.flatnonzero(~nonempty):
            far = int(np.argmax(dist))
            cent[j] = x[far]
            dist[far] = 0.0
        if np.isfinite(prev) and prev - obj <= tol * max(prev, 1e-300) and nonempty.all():
            break
        prev = obj
    labels, dist = assign(x, cent)
    return cent, labels, float(dist.sum())
