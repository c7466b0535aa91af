"""
Tests for ACC, NMI and the Rand index against brute-force oracles.
"""
import itertools
import math

import numpy as np
import pytest

from main.exceptions import DimensionMismatchError, InvalidParameterError
from metrics.scores import accuracy, contingency_matrix, evaluate, mean_scores, nmi, rand_index


def brute_force_accuracy(pred, truth):
    clusters = sorted(set(pred))
    classes = sorted(set(truth))
    size = max(len(clusters), len(classes))
    best = 0
    for perm in itertools.permutations(range(size), len(clusters)):
        mapping = dict(zip(clusters, perm))
        matched = sum(1 for p, t in zip(pred, truth) if classes.index(t) == mapping[p])
        best = max(best, matched)
    return best / len(pred)


def pair_enumeration_ri(pred, truth):
    agree = 0
    pairs = 0
    for i, j in itertools.combinations(range(len(pred)), 2):
        agree += (pred[i] == pred[j]) == (truth[i] == truth[j])
        pairs += 1
    return agree / pairs


# ============== Accuracy Tests ==============

class TestAccuracy:
    """Test accuracy"""

    def test_identical(self):
        """Test identical labels score 1"""
        assert accuracy([0, 1, 2, 1], [0, 1, 2, 1]) == 1.0

    def test_renamed_labels(self):
        """Test relabelled clusters still score 1"""
        truth = np.array([0, 0, 1, 1, 2, 2, 2])
        renamed = np.array([2, 0, 1])[truth]
        assert accuracy(renamed, truth) == 1.0

    def test_worked_example(self):
        """Test the best mapping matches 4 of 6"""
        assert accuracy([0, 0, 1, 1, 2, 2], [1, 1, 1, 0, 0, 2]) == pytest.approx(4 / 6)

    def test_matches_brute_force(self, rng):
        """Test Hungarian matching equals the best permutation"""
        for _ in range(50):
            c = int(rng.integers(2, 7))
            n = int(rng.integers(5, 25))
            pred = rng.integers(0, c, size=n).tolist()
            truth = rng.integers(0, c, size=n).tolist()
            assert accuracy(pred, truth) == pytest.approx(brute_force_accuracy(pred, truth), abs=1e-15)

    def test_cluster_counts_differ(self):
        """Test fewer predicted clusters than classes"""
        assert accuracy([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.5)

    def test_length_mismatch(self):
        """Test label vectors of different lengths are rejected"""
        with pytest.raises(DimensionMismatchError):
            accuracy([0, 1], [0, 1, 1])

    def test_empty(self):
        """Test empty label vectors are rejected"""
        with pytest.raises(InvalidParameterError):
            accuracy([], [])


# ============== NMI Tests ==============

class TestNmi:
    """Test nmi"""

    def test_identical_partitions(self):
        """Test identical partitions score exactly 1"""
        assert nmi([0, 0, 1, 1, 2], [0, 0, 1, 1, 2]) == 1.0

    def test_renamed_partitions(self):
        """Test relabelling does not change NMI"""
        assert nmi([1, 1, 0, 0], [0, 0, 1, 1]) == pytest.approx(1.0)

    def test_independent_partitions(self):
        """Test independent partitions score 0"""
        assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_single_cluster_conventions(self):
        """Test the conventions when a partition has one cluster"""
        assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
        assert nmi([0, 0, 0, 0], [0, 1, 0, 1]) == 0.0

    def test_geometric_mean_normalisation(self):
        """Test NMI against the formula with natural logs"""
        pred, truth = [0, 0, 1, 1, 1, 2], [0, 0, 0, 1, 1, 1]
        table = contingency_matrix(pred, truth) / 6.0
        rows, cols = table.sum(axis=1), table.sum(axis=0)
        mutual = sum(
            table[i, j] * math.log(table[i, j] / (rows[i] * cols[j]))
            for i in range(table.shape[0]) for j in range(table.shape[1]) if table[i, j] > 0
        )
        h_rows = -sum(v * math.log(v) for v in rows)
        h_cols = -sum(v * math.log(v) for v in cols)
        assert nmi(pred, truth) == pytest.approx(mutual / math.sqrt(h_rows * h_cols), abs=1e-12)

    def test_bounded(self, rng):
        """Test NMI stays within [0, 1]"""
        for _ in range(20):
            value = nmi(rng.integers(0, 4, 30), rng.integers(0, 3, 30))
            assert 0.0 <= value <= 1.0


# ============== Rand Index Tests ==============

class TestRandIndex:
    """Test rand_index"""

    def test_identical(self):
        """Test identical partitions score 1"""
        assert rand_index([0, 1, 1, 2], [0, 1, 1, 2]) == 1.0

    def test_split_pair_counts(self):
        """Test only pairs (0,1), (0,3) and (1,3) agree, so 3 of 6"""
        assert rand_index([0, 0, 1, 1], [0, 0, 0, 1]) == pytest.approx(0.5)

    def test_matches_pair_enumeration(self, rng):
        """Test RI equals brute-force pair counting"""
        for _ in range(20):
            n = int(rng.integers(2, 51))
            pred = rng.integers(0, 4, n).tolist()
            truth = rng.integers(0, 3, n).tolist()
            assert rand_index(pred, truth) == pair_enumeration_ri(pred, truth)

    def test_needs_two_points(self):
        """Test a single point is rejected"""
        with pytest.raises(InvalidParameterError):
            rand_index([0], [0])


# ============== Aggregation Tests ==============

class TestEvaluate:
    """Test evaluate and mean_scores"""

    def test_keys(self):
        """Test evaluate returns acc, nmi and ri"""
        scores = evaluate([0, 1, 1], [1, 0, 0])
        assert scores == {'acc': 1.0, 'nmi': 1.0, 'ri': 1.0}

    def test_mean(self):
        """Test key-wise means"""
        merged = mean_scores([{'acc': 1.0, 'nmi': 0.5}, {'acc': 0.5, 'nmi': 0.0}])
        assert merged == {'acc': 0.75, 'nmi': 0.25}

    def test_mean_of_nothing(self):
        """Test the mean of no scores is empty"""
        assert mean_scores([]) == {}
