"""
Tests for k-means label assignment and out-of-sample inference.
"""
import numpy as np
import pytest

from clustering.kmeans import assign_labels, lloyd, kmeans_plus_plus, normalize_rows, out_of_sample
from main.exceptions import DimensionMismatchError, InvalidParameterError
from metrics.scores import accuracy


def two_tight_blobs(rng, n=20):
    first = rng.normal(scale=0.01, size=(n, 2)) + np.array([100.0, 0.0])
    second = rng.normal(scale=0.01, size=(n, 2)) + np.array([0.0, 100.0])
    return np.vstack([first, second]), np.repeat([0, 1], n)


# ============== assign_labels Tests ==============

class TestAssignLabels:
    """Test assign_labels"""

    def test_indicator_rows(self):
        """Test one-hot rows recover their classes"""
        truth = np.array([0, 1, 2, 0, 1, 2, 2])
        result = assign_labels(np.eye(3)[truth], 3)
        assert result.sse == pytest.approx(0.0, abs=1e-20)
        assert accuracy(result.labels, truth) == 1.0

    def test_each_point_own_cluster(self, rng):
        """Test c = n puts every row in its own cluster with zero SSE"""
        f = rng.standard_normal((4, 3))
        result = assign_labels(f, 4)
        assert result.sse == pytest.approx(0.0, abs=1e-20)
        assert len(set(result.labels.tolist())) == 4

    def test_tight_blobs_every_restart(self, rng):
        """Test two tight blobs are separated from any seed"""
        f, truth = two_tight_blobs(rng)
        for seed in range(10):
            result = assign_labels(f, 2, restarts=1, seed=seed)
            assert accuracy(result.labels, truth) == 1.0

    def test_sse_matches_labels(self, rng):
        """Test the reported SSE matches the labels and centroids"""
        f = rng.standard_normal((30, 3))
        result = assign_labels(f, 4, restarts=3, seed=1)
        points, _ = normalize_rows(f)
        expected = np.sum((points - result.centroids[result.labels]) ** 2)
        assert result.sse == pytest.approx(expected, abs=1e-10)
        assert set(result.labels.tolist()) <= {0, 1, 2, 3}
        assert result.restarts_used == 3

    def test_deterministic_per_seed(self, rng):
        """Test the same seed gives the same labels"""
        f = rng.standard_normal((25, 3))
        first = assign_labels(f, 3, seed=4)
        second = assign_labels(f, 3, seed=4)
        np.testing.assert_array_equal(first.labels, second.labels)
        assert first.sse == second.sse

    def test_row_permutation(self, rng):
        """Test permuting rows permutes the labels"""
        f, _ = two_tight_blobs(rng)
        perm = rng.permutation(len(f))
        base = assign_labels(f, 2, seed=0).labels
        permuted = assign_labels(f[perm], 2, seed=0).labels
        assert accuracy(permuted, base[perm]) == 1.0

    def test_zero_rows_flagged(self, caplog):
        """Test zero rows are reported and logged"""
        f = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0, 0.1]])
        result = assign_labels(f, 2)
        np.testing.assert_array_equal(result.zero_rows, [1])
        assert 'zero' in caplog.text

    def test_too_many_clusters(self, rng):
        """Test more clusters than rows is rejected"""
        with pytest.raises(InvalidParameterError):
            assign_labels(rng.standard_normal((3, 2)), 4)


# ============== Lloyd Tests ==============

class TestLloyd:
    """Test lloyd"""

    def test_sse_non_increasing(self, rng):
        """Test Lloyd iterations never raise the SSE"""
        points, _ = normalize_rows(rng.standard_normal((60, 4)))
        start = kmeans_plus_plus(points, 5, np.random.default_rng(3))
        _, _, sse, history = lloyd(points, start)
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
        assert sse == history[-1]


# ============== Out-of-sample Tests ==============

class TestOutOfSample:
    """Test out_of_sample"""

    def test_training_data_reproduces_labels(self, rng):
        """Test projecting the training rows reproduces their labels"""
        x = rng.standard_normal((40, 4))
        w = rng.standard_normal((4, 3))
        result = assign_labels(x @ w, 3, seed=2)
        labels = out_of_sample(x, w, result.centroids)

        points, _ = normalize_rows(x @ w)
        dist = np.sum((points[:, None, :] - result.centroids[None, :, :]) ** 2, axis=2)
        own = dist[np.arange(len(x)), result.labels]
        dist[np.arange(len(x)), result.labels] = np.inf
        strictly_nearer = own < dist.min(axis=1)
        np.testing.assert_array_equal(labels[strictly_nearer], result.labels[strictly_nearer])

    def test_single_point(self, rng):
        """Test a single row is labelled as it is within a batch"""
        x = rng.standard_normal((30, 3))
        w = rng.standard_normal((3, 2))
        result = assign_labels(x @ w, 2, seed=0)
        reference = out_of_sample(x, w, result.centroids)
        assert out_of_sample(x[7], w, result.centroids)[0] == reference[7]

    def test_feature_mismatch(self, rng):
        """Test X and W with different feature counts are rejected"""
        with pytest.raises(DimensionMismatchError):
            out_of_sample(rng.standard_normal((5, 3)), rng.standard_normal((4, 2)), np.zeros((2, 2)))

    def test_centroid_width_mismatch(self, rng):
        """Test centroids of the wrong width are rejected"""
        with pytest.raises(DimensionMismatchError):
            out_of_sample(rng.standard_normal((5, 4)), rng.standard_normal((4, 2)), np.zeros((2, 3)))
