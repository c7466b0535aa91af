"""
Tests for the client state and its two local updates (closed-form W, projected
gradient F).
"""
import dataclasses

import numpy as np
import pytest

from clients.state import (
    ClientState,
    embedding_gradient,
    embedding_objective,
    factorize,
    local_objective,
    stiefel_project,
    update_f,
    update_w,
    w_stationarity_residual,
)
from graph.laplacian import NormalizedLaplacian, client_laplacian, spectral_embedding
from main.exceptions import DegenerateProjectionError, DimensionMismatchError, InvalidParameterError


def make_state(rng, n=12, d=4, clusters=2, weight=1.0, alpha=1.0, rho=1.0):
    x = rng.standard_normal((n, d))
    return ClientState.initialize(x, client_laplacian(x, knn_k=3), clusters, weight, alpha, rho)


def random_orthonormal(rng, n, c):
    q, _ = np.linalg.qr(rng.standard_normal((n, c)))
    return q


def client_lagrangian(state, z, y, alpha, rho):
    gap = state.w - z
    return local_objective(state, alpha) + float(np.sum(y * gap)) + 0.5 * rho * float(np.sum(gap ** 2))


# ============== Initialization Tests ==============

class TestClientStateInitialize:
    """Test ClientState.initialize"""

    def test_embedding_is_orthonormal(self, rng):
        """Test F starts with orthonormal columns"""
        state = make_state(rng)
        np.testing.assert_allclose(state.f.T @ state.f, np.eye(2), atol=1e-8)
        assert state.w.shape == (4, 2)
        assert state.n_samples == 12
        assert state.clusters == 2

    def test_initial_w_is_ridge_fit(self, rng):
        """Test W starts as the W-update solution with zero consensus and dual"""
        state = make_state(rng, weight=0.5, alpha=2.0, rho=0.7)
        system = 2 * 0.5 * 2.0 * state.x.T @ state.x + 0.7 * np.eye(4)
        expected = np.linalg.solve(system, 2 * 0.5 * 2.0 * state.x.T @ state.f)
        np.testing.assert_allclose(state.w, expected, atol=1e-10)

    def test_laplacian_size_mismatch(self, rng):
        """Test a Laplacian of the wrong size is rejected"""
        x = rng.standard_normal((8, 3))
        lap = client_laplacian(rng.standard_normal((9, 3)), knn_k=3)
        with pytest.raises(DimensionMismatchError):
            ClientState.initialize(x, lap, 2, 1.0, 1.0, 1.0)

    def test_factorisation_reused_until_parameters_change(self, rng):
        """Test the Cholesky factor is cached per (alpha, rho)"""
        state = make_state(rng)
        factor = state.ensure_factor(1.0, 1.0)
        assert state.ensure_factor(1.0, 1.0) is factor
        assert state.ensure_factor(1.0, 2.0) is not factor
        assert state.rho == 2.0

    def test_factor_rejects_non_positive_rho(self, rng):
        """Test factorize rejects rho = 0"""
        state = make_state(rng)
        with pytest.raises(InvalidParameterError):
            factorize(state.gram, state.weight, 1.0, 0.0)


# ============== W-update Tests ==============

class TestUpdateW:
    """Test update_w"""

    def test_alpha_zero_collapses(self, rng):
        """Test alpha = 0 gives W = Z - Y / rho"""
        state = make_state(rng, alpha=0.0, rho=2.0)
        z, y = rng.standard_normal((4, 2)), rng.standard_normal((4, 2))
        np.testing.assert_allclose(update_w(state, z, y, 0.0, 2.0), z - y / 2.0, atol=1e-12)

    def test_fixed_point_of_normal_equations(self, rng):
        """Test W0 is a fixed point when F = X W0 and Z = W0"""
        state = make_state(rng)
        w0 = rng.standard_normal((4, 2))
        state = dataclasses.replace(state, f=state.x @ w0)
        np.testing.assert_allclose(update_w(state, w0, np.zeros((4, 2)), 1.0, 1.0), w0, atol=1e-10)

    def test_matches_dense_solve(self, rng):
        """Test the cached factor agrees with a dense solve"""
        x = rng.standard_normal((6, 3))
        state = ClientState.initialize(x, client_laplacian(x, knn_k=2), 2, 1.0, 1.0, 0.5)
        state = dataclasses.replace(state, f=rng.standard_normal((6, 2)))
        z, y = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))

        w = update_w(state, z, y, 1.0, 0.5)
        oracle = np.linalg.solve(2 * x.T @ x + 0.5 * np.eye(3), 2 * x.T @ state.f + 0.5 * z - y)
        np.testing.assert_allclose(w, oracle, atol=1e-10)
        assert w_stationarity_residual(state, w, z, y, 1.0, 0.5) <= 1e-9

    def test_stationarity_residual_small(self, rng):
        """Test the W-subproblem gradient vanishes at the update"""
        for _ in range(10):
            state = make_state(rng, weight=1 / 3)
            z, y = rng.standard_normal((4, 2)), rng.standard_normal((4, 2))
            w = update_w(state, z, y, 1.0, 1.0)
            assert w_stationarity_residual(state, w, z, y, 1.0, 1.0) <= 1e-8

    def test_slice_shape_checked(self, rng):
        """Test a mis-shaped Z or Y slice is rejected"""
        state = make_state(rng)
        with pytest.raises(DimensionMismatchError):
            update_w(state, np.zeros((3, 2)), np.zeros((4, 2)), 1.0, 1.0)


# ============== Stiefel Projection Tests ==============

class TestStiefelProject:
    """Test stiefel_project"""

    def test_idempotent(self, rng):
        """Test an orthonormal matrix projects to itself"""
        q = random_orthonormal(rng, 7, 3)
        np.testing.assert_allclose(stiefel_project(q), q, atol=1e-12)

    def test_padded_diagonal(self):
        """Test a positive diagonal 4x2 matrix projects to the first two identity columns"""
        m = np.zeros((4, 2))
        m[0, 0], m[1, 1] = 2.0, 3.0
        np.testing.assert_allclose(stiefel_project(m), np.eye(4)[:, :2], atol=1e-12)

    def test_nearest_orthonormal(self, rng):
        """Test the projection beats random orthonormal matrices in distance"""
        m = rng.standard_normal((8, 3))
        projected = stiefel_project(m)
        assert np.linalg.norm(projected.T @ projected - np.eye(3)) <= 1e-10
        best = np.linalg.norm(m - projected)
        for _ in range(1000):
            assert best <= np.linalg.norm(m - random_orthonormal(rng, 8, 3))

    def test_rank_deficient(self):
        """Test a rank deficient matrix raises DegenerateProjectionError"""
        m = np.ones((5, 2))
        with pytest.raises(DegenerateProjectionError):
            stiefel_project(m)


# ============== F-update Tests ==============

class TestUpdateF:
    """Test update_f"""

    def test_gradient_matches_finite_differences(self, rng):
        """Test the analytic gradient against central differences"""
        for _ in range(20):
            n, c = 9, 3
            lap = client_laplacian(rng.standard_normal((n, 2)), knn_k=3).values
            f, target = rng.standard_normal((n, c)), rng.standard_normal((n, c))
            alpha = rng.uniform(0.0, 3.0)
            grad = embedding_gradient(lap, f, target, alpha)

            entries = [(rng.integers(n), rng.integers(c)) for _ in range(10)]
            analytic, numeric = [], []
            h = 1e-6
            for i, j in entries:
                step = np.zeros_like(f)
                step[i, j] = h
                up = embedding_objective(lap, f + step, target, alpha)
                down = embedding_objective(lap, f - step, target, alpha)
                numeric.append((up - down) / (2 * h))
                analytic.append(grad[i, j])
            analytic, numeric = np.array(analytic), np.array(numeric)
            assert np.linalg.norm(analytic - numeric) <= 1e-5 * max(np.linalg.norm(analytic), 1e-12)

    def test_alpha_zero_at_eigenvectors(self, rng):
        """Test the objective cannot drop below its value at the bottom eigenvectors when alpha = 0"""
        state = make_state(rng, alpha=0.0)
        state = dataclasses.replace(state, f=spectral_embedding(state.laplacian, 2))
        target = state.x @ state.w
        before = embedding_objective(state.laplacian, state.f, target, 0.0)
        f = update_f(state, state.w, 0.0)
        assert embedding_objective(state.laplacian, f, target, 0.0) == pytest.approx(before, abs=1e-10)

    def test_output_orthonormal(self, rng):
        """Test every F-update returns orthonormal columns"""
        for _ in range(5):
            state = make_state(rng)
            f = update_f(state, rng.standard_normal((4, 2)) * 3, 1.0, eta=0.5, inner_iters=10)
            assert np.linalg.norm(f.T @ f - np.eye(2)) <= 1e-8

    def test_objective_sequence_non_increasing(self, rng):
        """Test backtracking never increases the embedding objective"""
        x = rng.standard_normal((10, 3))
        state = ClientState.initialize(x, client_laplacian(x, knn_k=3), 2, 1.0, 1.0, 1.0)
        w_new = rng.standard_normal((3, 2))
        history = []
        f = update_f(state, w_new, 1.0, eta=0.1, inner_iters=5, history=history)

        assert len(history) >= 2
        assert all(b <= a for a, b in zip(history, history[1:]))
        assert history[-1] == pytest.approx(embedding_objective(state.laplacian, f, x @ w_new, 1.0), abs=1e-12)

    def test_invalid_step(self, rng):
        """Test a non-positive step is rejected"""
        state = make_state(rng)
        with pytest.raises(InvalidParameterError):
            update_f(state, state.w, 1.0, eta=0.0)


# ============== Local Objective Tests ==============

class TestLocalObjective:
    """Test local_objective"""

    def test_identity_laplacian_perfect_fit(self, rng):
        """Test L = I with F = XW gives omega times c"""
        f = random_orthonormal(rng, 6, 3)
        state = ClientState(
            x=f, laplacian=NormalizedLaplacian(values=np.eye(6), degrees=np.ones(6)),
            w=np.eye(3), f=f, weight=0.5, gram=f.T @ f, alpha=1.0, rho=1.0,
            factor=factorize(f.T @ f, 0.5, 1.0, 1.0),
        )
        assert local_objective(state, 1.0) == pytest.approx(0.5 * 3, abs=1e-12)

    def test_alpha_zero_is_trace_term(self, rng):
        """Test alpha = 0 leaves only the weighted trace term"""
        state = make_state(rng, weight=0.25)
        expected = 0.25 * np.trace(state.f.T @ state.laplacian.values @ state.f)
        assert local_objective(state, 0.0) == pytest.approx(expected, abs=1e-12)

    def test_term_by_term(self, rng):
        """Test the objective against its two terms computed directly"""
        state = make_state(rng, weight=0.4)
        trace_term = np.trace(state.f.T @ state.laplacian.values @ state.f)
        residual = np.linalg.norm(state.f - state.x @ state.w) ** 2
        assert local_objective(state, 1.7) == pytest.approx(0.4 * (trace_term + 1.7 * residual), abs=1e-12)

    def test_client_step_does_not_increase_lagrangian(self, rng):
        """Test a W then F step does not raise the client's Lagrangian terms"""
        for _ in range(5):
            state = make_state(rng, weight=1 / 3)
            z, y = rng.standard_normal((4, 2)) * 0.1, rng.standard_normal((4, 2)) * 0.1
            before = client_lagrangian(state, z, y, 1.0, 1.0)
            w = update_w(state, z, y, 1.0, 1.0)
            f = update_f(state, w, 1.0)
            after = client_lagrangian(dataclasses.replace(state, w=w, f=f), z, y, 1.0, 1.0)
            assert after <= before + 1e-10
