"""K-means over projected features and pseudo-label production."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn


@dataclass
class KmeansResult:
    centroids: np.ndarray  # K x d
    assignments: np.ndarray  # cluster id per point, in [0, K)
    inertia: float
    iterations: int


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # ||x||^2 + ||c||^2 - 2 x.c, clipped at 0 against rounding
    d2 = (
        (points * points).sum(axis=1)[:, None]
        + (centroids * centroids).sum(axis=1)[None, :]
        - 2.0 * points @ centroids.T
    )
    return np.maximum(d2, 0.0)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = _sq_distances(points, centroids[:1]).ravel()
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining mass on already-chosen positions: pick uniformly
            centroids[i] = points[rng.integers(n)]
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
        idx = min(idx, n - 1)
        centroids[i] = points[idx]
        closest = np.minimum(closest, _sq_distances(points, centroids[i : i + 1]).ravel())
    return centroids


def _lloyd(
    points: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, np.ndarray, float, int]:
    n, _ = points.shape
    k = centroids.shape[0]
    points_sq = (points * points).sum(axis=1)
    prev_inertia = np.inf
    assignments = np.zeros(n, dtype=np.intp)
    iterations = 0
    for it in range(max_iter):
        iterations = it + 1
        d2 = _sq_distances(points, centroids)
        assignments = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), assignments]

        # repair empty clusters: hand each one the point currently farthest
        # from its own centroid
        counts = np.bincount(assignments, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            farthest = int(point_d2.argmax())
            assignments[farthest] = empty
            point_d2[farthest] = 0.0
            counts = np.bincount(assignments, minlength=k)

        onehot = (assignments[None, :] == np.arange(k)[:, None]).astype(np.float64)
        sums = onehot @ points
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]

        # inertia after the update step, via sum ||x||^2 - sum n_c ||mean_c||^2
        # (exact for the clusters just averaged; empty ones contribute nothing)
        inertia = float(
            points_sq.sum()
            - ((centroids[nonempty] * centroids[nonempty]).sum(axis=1) * counts[nonempty]).sum()
        )
        inertia = max(inertia, 0.0)
        assert inertia <= prev_inertia + 1e-9 * (1.0 + inertia), (
            f"inertia increased: {prev_inertia} -> {inertia}"
        )
        if prev_inertia - inertia <= tol:
            prev_inertia = inertia
            break
        prev_inertia = inertia
    return centroids, assignments, prev_inertia, iterations


def kmeans_fit(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
    n_init: int = 10,
) -> KmeansResult:
    """Lloyd's algorithm with k-means++ seeding, best of ``n_init`` restarts.

    Deterministic given the seed. Empty clusters are repaired by reseeding
    them with the point farthest from its assigned centroid, so the result
    has K non-empty clusters whenever the points allow it.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if not np.isfinite(points).all():
        raise ValueError("points must be finite")

    rng = np.random.default_rng(seed)
    best: KmeansResult | None = None
    for _ in range(n_init):
        centroids = _kmeanspp_init(points, k, rng)
        centroids, assignments, inertia, iterations = _lloyd(
            points, centroids.copy(), max_iter, tol
        )
        if best is None or inertia < best.inertia:
            best = KmeansResult(centroids, assignments, inertia, iterations)
    assert best is not None
    return best


def project_view(mlp: "nn.Mlp", rows: np.ndarray) -> np.ndarray:
    """Forward a view's rows through its projection net, no gradient kept."""
    out, _ = nn.forward(mlp, np.asarray(rows, dtype=np.float64))
    return out


def assign_pseudo_labels(
    proj: "nn.Mlp", rows: np.ndarray, k: int, seed: int
) -> np.ndarray:
    """K-means cluster ids over the projected rows, aligned to input order."""
    return kmeans_fit(project_view(proj, rows), k, seed).assignments


def pairwise_labels(cluster_ids: np.ndarray) -> np.ndarray:
    """Upper-triangular 0/1 matrix: q[i, j] = 1 iff i and j share a cluster."""
    ids = np.asarray(cluster_ids)
    same = (ids[:, None] == ids[None, :]).astype(np.uint8)
    return np.triu(same, k=1)
