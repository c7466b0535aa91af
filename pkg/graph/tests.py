"""
Tests for the k-NN affinity graph, the normalised Laplacian and the
median-heuristic bandwidth.
"""
import numpy as np
import pytest

from graph.laplacian import (
    AUTO,
    build_affinity,
    build_laplacian,
    client_laplacian,
    knn_indices,
    median_heuristic_sigma,
    spectral_embedding,
)
from main.exceptions import DegenerateDataError, InvalidParameterError, IsolatedVertexError


# ============== Affinity Tests ==============

class TestBuildAffinity:
    """Test build_affinity"""

    def test_identical_points(self):
        """Two identical points are linked with weight exp(0) = 1"""
        a = build_affinity(np.array([[0.5, 0.5], [0.5, 0.5]]), knn_k=1, sigma=1.0)
        np.testing.assert_array_equal(a, [[0.0, 1.0], [1.0, 0.0]])

    def test_collinear_points_or_union(self):
        """Points 0, 1, 3 with knn_k=1: 1-2 and 2-3 linked, 1-3 not"""
        x = np.array([[0.0], [1.0], [3.0]])
        a = build_affinity(x, knn_k=1, sigma=1.0)

        assert a[0, 1] == pytest.approx(np.exp(-0.5))
        assert a[1, 0] == pytest.approx(np.exp(-0.5))
        assert a[1, 2] == pytest.approx(np.exp(-2.0))
        assert a[2, 1] == pytest.approx(np.exp(-2.0))
        assert a[0, 2] == 0.0
        assert a[2, 0] == 0.0

    def test_large_sigma_saturates_links(self, rng):
        """With a huge sigma every kNN-linked entry tends to 1"""
        x = rng.standard_normal((12, 3))
        a = build_affinity(x, knn_k=3, sigma=1e8)
        linked = a > 0
        np.testing.assert_allclose(a[linked], 1.0, atol=1e-12)

    def test_bitwise_symmetric_zero_diagonal(self, rng):
        """Test the affinity is exactly symmetric with a zero diagonal"""
        x = rng.standard_normal((25, 4))
        a = build_affinity(x, knn_k=4)
        assert np.array_equal(a, a.T)
        assert np.all(np.diag(a) == 0.0)
        assert np.all((a >= 0) & (a <= 1))

    def test_knn_k_too_large(self, rng):
        """Test knn_k >= n is rejected"""
        x = rng.standard_normal((5, 2))
        with pytest.raises(InvalidParameterError):
            build_affinity(x, knn_k=5)

    def test_ties_break_toward_lower_index(self):
        """Point 1 sits equally far from points 0 and 2; its neighbour is 0"""
        x = np.array([[0.0], [1.0], [2.0]])
        neighbours, _ = knn_indices(x, 1)
        assert neighbours[1, 0] == 0

    def test_non_positive_sigma_rejected(self, rng):
        """Test sigma = 0 is rejected"""
        with pytest.raises(InvalidParameterError):
            build_affinity(rng.standard_normal((6, 2)), knn_k=2, sigma=0.0)

    def test_non_numeric_sigma_rejected(self, rng):
        """Test a non-numeric sigma raises InvalidParameterError"""
        with pytest.raises(InvalidParameterError, match='wide'):
            build_affinity(rng.standard_normal((6, 2)), knn_k=2, sigma='wide')


# ============== Laplacian Tests ==============

class TestBuildLaplacian:
    """Test build_laplacian"""

    def test_two_node_graph(self):
        """Test a single edge gives [[1, -1], [-1, 1]]"""
        lap = build_laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(lap.values, [[1.0, -1.0], [-1.0, 1.0]])
        np.testing.assert_array_equal(lap.degrees, [1.0, 1.0])

    def test_path_graph_eigenvalues(self):
        """3-node path with unit weights has normalised spectrum {0, 1, 2}"""
        a = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        lap = build_laplacian(a)
        d = np.array([1.0, 2.0, 1.0])
        expected = np.eye(3) - a / np.sqrt(np.outer(d, d))
        np.testing.assert_allclose(lap.values, expected, atol=1e-15)
        np.testing.assert_allclose(np.linalg.eigvalsh(lap.values), [0.0, 1.0, 2.0], atol=1e-12)

    def test_unnormalised_row_sums_zero(self, rng):
        """Test D - A has zero row sums"""
        a = build_affinity(rng.standard_normal((10, 3)), knn_k=3)
        unnormalised = np.diag(a.sum(axis=1)) - a
        np.testing.assert_allclose(unnormalised.sum(axis=1), 0.0, atol=1e-12)

    def test_isolated_vertex_named(self):
        """Test an isolated vertex is reported by index"""
        a = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        with pytest.raises(IsolatedVertexError) as exc:
            build_laplacian(a)
        assert exc.value.index == 2
        assert '2' in str(exc.value)

    def test_random_graphs_symmetric_psd(self, rng):
        """Test random kNN graphs give symmetric PSD Laplacians"""
        for _ in range(10):
            lap = client_laplacian(rng.standard_normal((10, 3)), knn_k=3)
            assert np.max(np.abs(lap.values - lap.values.T)) <= 1e-12
            eigenvalues = np.linalg.eigvalsh(lap.values)
            assert eigenvalues.min() >= -1e-8
            assert eigenvalues.max() <= 2.0 + 1e-8

    def test_components_give_zero_eigenvalues(self, rng):
        """Three far-apart groups whose kNN stay inside each group"""
        groups = [rng.standard_normal((8, 2)) + offset for offset in (0.0, 1000.0, -1000.0)]
        lap = client_laplacian(np.vstack(groups), knn_k=3)
        eigenvalues = np.linalg.eigvalsh(lap.values)
        assert np.sum(np.abs(eigenvalues) <= 1e-8) >= 3


# ============== Bandwidth Tests ==============

class TestMedianHeuristicSigma:
    """Test median_heuristic_sigma"""

    def test_evenly_spaced_line(self):
        """Test points 0, 1, 2 with knn_k = 1 give sigma = 1"""
        assert median_heuristic_sigma(np.array([[0.0], [1.0], [2.0]]), 1) == pytest.approx(1.0)

    def test_two_points(self):
        """Test two points give their distance"""
        x = np.array([[0.0, 0.0], [3.0, 4.0]])
        assert median_heuristic_sigma(x, 1) == pytest.approx(5.0)

    def test_duplicated_dataset_is_degenerate(self):
        """Test all-zero kNN distances raise DegenerateDataError"""
        base = np.array([[0.0], [5.0], [9.0]])
        with pytest.raises(DegenerateDataError):
            median_heuristic_sigma(np.repeat(base, 2, axis=0), 1)

    def test_zero_median_uses_positive_distances(self):
        """Three coincident points give kNN distances 0, 0, 0, 5"""
        x = np.array([[0.0], [0.0], [0.0], [5.0]])
        assert median_heuristic_sigma(x, 1) == pytest.approx(5.0)

    def test_auto_matches_explicit(self, rng):
        """Test sigma='auto' matches passing the heuristic value"""
        x = rng.standard_normal((15, 3))
        sigma = median_heuristic_sigma(x, 4)
        np.testing.assert_array_equal(build_affinity(x, 4, AUTO), build_affinity(x, 4, sigma))


# ============== Spectral Embedding Tests ==============

class TestSpectralEmbedding:
    """Test spectral_embedding"""

    def test_orthonormal_bottom_eigenvectors(self, rng):
        """Test the embedding is orthonormal and spans the bottom eigenvectors"""
        lap = client_laplacian(rng.standard_normal((20, 3)), knn_k=4)
        f = spectral_embedding(lap, 3)
        np.testing.assert_allclose(f.T @ f, np.eye(3), atol=1e-10)
        expected = np.sort(np.linalg.eigvalsh(lap.values))[:3].sum()
        assert np.trace(f.T @ lap.values @ f) == pytest.approx(expected, abs=1e-10)

    def test_clusters_out_of_range(self, rng):
        """Test clusters above n is rejected"""
        lap = client_laplacian(rng.standard_normal((6, 2)), knn_k=2)
        with pytest.raises(InvalidParameterError):
            spectral_embedding(lap, 7)
