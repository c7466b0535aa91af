"""
k-NN Gaussian similarity graph and symmetric normalised Laplacian for one
client's data.

All matrices are dense: a client holds at most a few thousand samples.
kNN and knn_k always mean graph neighbours; the embedding width is `clusters`.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.spatial.distance import cdist

from main.exceptions import (
    DegenerateDataError,
    InvalidParameterError,
    IsolatedVertexError,
)

logger = logging.getLogger(__name__)

AUTO = 'auto'


@dataclass(frozen=True)
class NormalizedLaplacian:
    """L̂ = I − D^{-1/2} A D^{-1/2} together with the degrees D_ii."""
    values: np.ndarray
    degrees: np.ndarray

    @property
    def size(self):
        return self.values.shape[0]


def as_data_matrix(x):
    """Validate a client sample matrix (rows are samples) and return it as float64."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InvalidParameterError(f"Data matrix must be 2-D, got {x.ndim}-D")
    n, d = x.shape
    if n < 2 or d < 1:
        raise InvalidParameterError(f"Data matrix needs at least 2 rows and 1 column, got {n}x{d}")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("Data matrix contains non-finite entries")
    return x


def _check_knn_k(knn_k, n):
    if isinstance(knn_k, bool) or int(knn_k) != knn_k or knn_k < 1:
        raise InvalidParameterError(f"knn_k must be a positive integer, got {knn_k!r}")
    if knn_k >= n:
        raise InvalidParameterError(f"knn_k={knn_k} must be smaller than the number of samples ({n})")
    return int(knn_k)


def knn_indices(x, knn_k):
    """
    Indices of the knn_k nearest neighbours of every row, self excluded.

    Equal distances are resolved toward the lower sample index.

    Returns:
        (indices, squared_distances): indices is n x knn_k, squared_distances
        is the full n x n matrix with a zero diagonal.
    """
    x = as_data_matrix(x)
    knn_k = _check_knn_k(knn_k, x.shape[0])

    sq_dist = cdist(x, x, metric='sqeuclidean')
    ranking = sq_dist.copy()
    np.fill_diagonal(ranking, np.inf)
    # stable sort keeps index order among equal distances
    order = np.argsort(ranking, axis=1, kind='stable')
    return order[:, :knn_k], sq_dist


def median_heuristic_sigma(x, knn_k):
    """
    Kernel bandwidth from the median distance between each point and its kNN neighbours.

    Raises:
        DegenerateDataError: every kNN distance is zero.
    """
    neighbours, sq_dist = knn_indices(x, knn_k)
    rows = np.arange(sq_dist.shape[0])[:, None]
    distances = np.sqrt(sq_dist[rows, neighbours]).ravel()

    sigma = float(np.median(distances))
    if sigma > 0:
        return sigma

    positive = distances[distances > 0]
    if positive.size == 0:
        raise DegenerateDataError("All k-nearest-neighbour distances are zero; cannot choose sigma")
    sigma = float(np.median(positive))
    logger.warning(f"Median kNN distance is zero; using median of positive distances sigma={sigma:.6g}")
    return sigma


def _resolve_sigma(x, knn_k, sigma):
    if sigma is None or (isinstance(sigma, str) and sigma.lower() == AUTO):
        return median_heuristic_sigma(x, knn_k)
    try:
        sigma = float(sigma)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"sigma must be positive or '{AUTO}', got {sigma!r}") from None
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive or '{AUTO}', got {sigma!r}")
    return sigma


def build_affinity(x, knn_k, sigma=AUTO):
    """
    Symmetric k-NN Gaussian affinity.

    A_ij = exp(-||x_i - x_j||^2 / (2 sigma^2)) when j is among the kNN of i or
    i is among the kNN of j, otherwise 0. The diagonal is 0.
    """
    x = as_data_matrix(x)
    neighbours, sq_dist = knn_indices(x, knn_k)
    sigma = _resolve_sigma(x, knn_k, sigma)

    n = x.shape[0]
    linked = np.zeros((n, n), dtype=bool)
    linked[np.arange(n)[:, None], neighbours] = True
    linked |= linked.T

    with np.errstate(invalid='ignore'):
        kernel = np.exp(-sq_dist / (2.0 * sigma ** 2))
    affinity = np.where(linked, kernel, 0.0)
    # mirror the strict upper triangle so the result is bitwise symmetric
    upper = np.triu(affinity, k=1)
    return upper + upper.T


def build_laplacian(a):
    """
    Symmetric normalised Laplacian I − D^{-1/2} A D^{-1/2}.

    Raises:
        IsolatedVertexError: a row of A sums to zero.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParameterError(f"Affinity must be square, got shape {a.shape}")

    degrees = a.sum(axis=1)
    isolated = np.flatnonzero(degrees <= 0)
    if isolated.size:
        raise IsolatedVertexError(int(isolated[0]))

    inv_sqrt = 1.0 / np.sqrt(degrees)
    values = np.eye(a.shape[0]) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    values = 0.5 * (values + values.T)
    return NormalizedLaplacian(values=values, degrees=degrees)


def client_laplacian(x, knn_k, sigma=AUTO):
    """Affinity and Laplacian in one call."""
    return build_laplacian(build_affinity(x, knn_k, sigma))


def spectral_embedding(laplacian, clusters):
    """Bottom-`clusters` eigenvectors of L̂ as an orthonormal n x clusters matrix."""
    values = laplacian.values if isinstance(laplacian, NormalizedLaplacian) else np.asarray(laplacian)
    n = values.shape[0]
    if not 1 <= clusters <= n:
        raise InvalidParameterError(f"clusters={clusters} must lie in [1, {n}]")
    _, vectors = eigh(values, subset_by_index=[0, clusters - 1])
    # fix the sign of each column so the largest-magnitude entry is positive
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(clusters)])
    signs[signs == 0] = 1.0
    return vectors * signs
