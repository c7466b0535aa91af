"""
Clustering evaluation: accuracy under the optimal label matching, normalised
mutual information, and the (unadjusted) Rand index.

NMI is normalised by the geometric mean of the two entropies, with natural
logarithms.
"""
import numpy as np
from scipy.optimize import linear_sum_assignment

from main.exceptions import DimensionMismatchError, InvalidParameterError


def as_label_vector(labels):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise InvalidParameterError(f"Labels must be 1-D, got shape {labels.shape}")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        rounded = labels.astype(np.int64)
        if not np.array_equal(rounded, labels):
            raise InvalidParameterError("Labels must be integers")
        labels = rounded
    if labels.size and labels.min() < 0:
        raise InvalidParameterError("Labels must be non-negative")
    return labels.astype(np.int64)


def _pair(pred, truth):
    pred = as_label_vector(pred)
    truth = as_label_vector(truth)
    if pred.size != truth.size:
        raise DimensionMismatchError(f"Label vectors differ in length: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise InvalidParameterError("Label vectors are empty")
    return pred, truth


def contingency_matrix(pred, truth):
    """Counts n_ij of points in predicted cluster i and true class j (compacted labels)."""
    pred, truth = _pair(pred, truth)
    _, pred_idx = np.unique(pred, return_inverse=True)
    _, truth_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((pred_idx.max() + 1, truth_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (pred_idx, truth_idx), 1)
    return table


def accuracy(pred, truth):
    """Fraction of points matched under the best one-to-one cluster/class mapping."""
    table = contingency_matrix(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


def _entropy(counts, total):
    probs = counts[counts > 0] / total
    return float(-np.sum(probs * np.log(probs)))


def nmi(pred, truth):
    """
    I(pred; truth) / sqrt(H(pred) H(truth)).

    Both partitions single-cluster gives 1; exactly one zero entropy gives 0.
    """
    table = contingency_matrix(pred, truth)
    total = table.sum()
    h_pred = _entropy(table.sum(axis=1), total)
    h_truth = _entropy(table.sum(axis=0), total)
    if h_pred == 0 and h_truth == 0:
        return 1.0
    if h_pred == 0 or h_truth == 0:
        return 0.0
    # one non-zero cell per row and column: same partition under renaming
    if np.count_nonzero(table) == table.shape[0] == table.shape[1]:
        return 1.0

    joint = table / total
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / total ** 2
    nonzero = joint > 0
    mutual = float(np.sum(joint[nonzero] * np.log(joint[nonzero] / outer[nonzero])))
    return float(min(max(mutual / np.sqrt(h_pred * h_truth), 0.0), 1.0))


def _comb2(values):
    values = np.asarray(values, dtype=np.int64)
    return int(np.sum(values * (values - 1) // 2))


def rand_index(pred, truth):
    """Share of point pairs on which both partitions agree, from the contingency table."""
    table = contingency_matrix(pred, truth)
    n = int(table.sum())
    if n < 2:
        raise InvalidParameterError("Rand index needs at least two points")
    total_pairs = n * (n - 1) // 2
    same_both = _comb2(table.ravel())
    same_pred = _comb2(table.sum(axis=1))
    same_truth = _comb2(table.sum(axis=0))
    agreements = total_pairs + 2 * same_both - same_pred - same_truth
    return agreements / total_pairs


def evaluate(pred, truth):
    """ACC, NMI and RI as a dict."""
    return {
        'acc': accuracy(pred, truth),
        'nmi': nmi(pred, truth),
        'ri': rand_index(pred, truth),
    }


def mean_scores(score_dicts):
    """Key-wise mean over a list of evaluate() results."""
    if not score_dicts:
        return {}
    keys = score_dicts[0].keys()
    return {key: float(np.mean([scores[key] for scores in score_dicts])) for key in keys}
