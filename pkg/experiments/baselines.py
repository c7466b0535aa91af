"""
Reference methods for comparison with the federated model: spectral
clustering on each client alone (stSC) and on the pooled data (uSC).
"""
import logging

import numpy as np

from clustering.kmeans import assign_labels
from graph.laplacian import AUTO, client_laplacian, spectral_embedding
from metrics.scores import evaluate, mean_scores

logger = logging.getLogger(__name__)


def single_task_spectral(x, clusters, knn_k=10, sigma=AUTO, restarts=10, seed=0):
    """Labels from the bottom-`clusters` eigenvectors of one client's Laplacian."""
    embedding = spectral_embedding(client_laplacian(x, knn_k, sigma), clusters)
    return assign_labels(embedding, clusters, restarts=restarts, seed=seed).labels


def union_spectral(datasets, clusters, knn_k=10, sigma=AUTO, restarts=10, seed=0):
    """Cluster the concatenation of every client's samples, then split labels back per client."""
    pooled = np.vstack(datasets)
    labels = single_task_spectral(pooled, clusters, knn_k=knn_k, sigma=sigma, restarts=restarts, seed=seed)
    bounds = np.cumsum([len(x) for x in datasets])[:-1]
    return np.split(labels, bounds)


def baseline_scores(datasets, labels, hyper, restarts=10):
    """Mean ACC/NMI/RI over clients for stSC and uSC."""
    single = [
        evaluate(
            single_task_spectral(x, hyper.clusters, hyper.knn_k, hyper.sigma, restarts, hyper.seed + idx),
            truth,
        )
        for idx, (x, truth) in enumerate(zip(datasets, labels))
    ]
    pooled = union_spectral(datasets, hyper.clusters, hyper.knn_k, hyper.sigma, restarts, hyper.seed)
    union = [evaluate(pred, truth) for pred, truth in zip(pooled, labels)]
    logger.debug(f"Baselines: stSC={mean_scores(single)} uSC={mean_scores(union)}")
    return {'stsc': mean_scores(single), 'usc': mean_scores(union)}
