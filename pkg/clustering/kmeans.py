"""
Embedding discretisation: row normalisation, k-means++ with restarts, and
out-of-sample assignment through a frozen W_t.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from main.exceptions import DimensionMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)

DEFAULT_RESTARTS = 10
MAX_LLOYD_ITERS = 300
LLOYD_TOL = 1e-8


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    sse: float
    restarts_used: int
    zero_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    sse_history: list = field(default_factory=list)


def normalize_rows(f):
    """
    L2-normalise every row; rows with zero norm are left as they are.

    Returns:
        (normalised, zero_rows) where zero_rows lists the untouched row indices.
    """
    f = np.asarray(f, dtype=float)
    norms = np.linalg.norm(f, axis=1)
    zero = norms == 0
    safe = np.where(zero, 1.0, norms)
    return f / safe[:, None], np.flatnonzero(zero)


def _sse(points, centroids, labels):
    return float(np.sum((points - centroids[labels]) ** 2))


def kmeans_plus_plus(points, clusters, rng):
    """D^2-weighted seeding; falls back to uniform choice once every point is a centre."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, clusters):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def lloyd(points, centroids, max_iter=MAX_LLOYD_ITERS, tol=LLOYD_TOL):
    """
    Lloyd iterations from the given centres.

    Stops when the relative SSE change drops to tol or after max_iter
    iterations. Empty clusters are re-seeded with the point farthest from its
    current centre.

    Returns:
        (labels, centroids, sse, history)
    """
    centroids = centroids.copy()
    clusters = centroids.shape[0]
    labels = np.argmin(cdist(points, centroids, metric='sqeuclidean'), axis=1)
    sse = _sse(points, centroids, labels)
    history = [sse]

    for _ in range(max_iter):
        for k in range(clusters):
            members = labels == k
            if np.any(members):
                centroids[k] = points[members].mean(axis=0)
            else:
                errors = np.sum((points - centroids[labels]) ** 2, axis=1)
                far = int(np.argmax(errors))
                centroids[k] = points[far]
                labels[far] = k
        labels = np.argmin(cdist(points, centroids, metric='sqeuclidean'), axis=1)
        new_sse = _sse(points, centroids, labels)
        history.append(new_sse)
        change = sse - new_sse
        sse = new_sse
        if sse == 0 or change <= tol * max(history[-2], np.finfo(float).tiny):
            break

    return labels, centroids, sse, history


def assign_labels(f, clusters, restarts=DEFAULT_RESTARTS, seed=0):
    """
    k-means on the row-normalised embedding, keeping the restart with the lowest SSE.

    Restart r draws from the r-th child of SeedSequence(seed).
    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 2:
        raise InvalidParameterError(f"Embedding must be 2-D, got shape {f.shape}")
    n = f.shape[0]
    if isinstance(clusters, bool) or clusters < 1 or clusters > n:
        raise InvalidParameterError(f"clusters={clusters} must lie in [1, {n}]")
    if restarts < 1:
        raise InvalidParameterError(f"restarts must be at least 1, got {restarts!r}")
    if not np.all(np.isfinite(f)):
        raise InvalidParameterError("Embedding contains non-finite entries")

    points, zero_rows = normalize_rows(f)
    if zero_rows.size:
        logger.warning(f"{zero_rows.size} embedding rows are zero and were left unnormalised")

    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        start = kmeans_plus_plus(points, clusters, rng)
        labels, centroids, sse, history = lloyd(points, start)
        if best is None or sse < best.sse:
            best = KMeansResult(
                labels=labels, centroids=centroids, sse=sse,
                restarts_used=restarts, zero_rows=zero_rows, sse_history=history,
            )
    return best


def out_of_sample(x_new, w, centroids):
    """Labels for unseen samples: nearest training centroid of row-normalised X_new W."""
    x_new = np.asarray(x_new, dtype=float)
    w = np.asarray(w, dtype=float)
    centroids = np.asarray(centroids, dtype=float)
    if x_new.ndim == 1:
        x_new = x_new[None, :]
    if x_new.shape[1] != w.shape[0]:
        raise DimensionMismatchError(f"New data have {x_new.shape[1]} features, W expects {w.shape[0]}")
    if centroids.shape[1] != w.shape[1]:
        raise DimensionMismatchError(
            f"Centroids have width {centroids.shape[1]}, W produces {w.shape[1]}"
        )
    embedded, _ = normalize_rows(x_new @ w)
    return np.argmin(cdist(embedded, centroids, metric='sqeuclidean'), axis=1)
