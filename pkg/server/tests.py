"""
Tests for the consensus server: Z-update, dual ascent and residuals.
"""
import numpy as np
import pytest

from main.exceptions import DimensionMismatchError, InvalidParameterError
from server.consensus import ServerState, dual_residual, primal_residual, update_y, update_z
from tensor.tsvt import prox_objective


def matrix_svt(mat, tau):
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    return (u * np.maximum(s - tau, 0.0)) @ vh


# ============== ServerState Tests ==============

class TestServerState:
    """Test ServerState"""

    def test_zeros(self):
        """Test a fresh server holds zero Z and Y"""
        srv = ServerState.zeros(5, 3, 4, beta=0.1, rho=1.0)
        assert srv.shape == (5, 3, 4)
        assert not srv.z.any() and not srv.y.any()

    def test_broadcast_returns_copies(self, rng):
        """Test broadcast slices do not alias server state"""
        srv = ServerState.zeros(3, 2, 2, beta=0.1, rho=1.0)
        srv.z = rng.standard_normal((3, 2, 2))
        z_slice, _ = srv.broadcast(1)
        z_slice[:] = 0.0
        assert srv.z[:, :, 1].any()

    def test_invalid_rho(self):
        """Test rho = 0 is rejected"""
        with pytest.raises(InvalidParameterError):
            ServerState.zeros(2, 2, 2, beta=0.1, rho=0.0)


# ============== Z-update Tests ==============

class TestUpdateZ:
    """Test update_z"""

    def test_zero_beta(self, rng):
        """Test beta = 0 gives Z = W + Y / rho"""
        srv = ServerState.zeros(4, 2, 3, beta=0.0, rho=2.0)
        srv.y = rng.standard_normal(srv.shape)
        w = rng.standard_normal(srv.shape)
        np.testing.assert_allclose(update_z(srv, w), w + srv.y / 2.0, atol=1e-15)

    def test_huge_beta_zeroes(self, rng):
        """Test a huge beta shrinks Z to zero"""
        srv = ServerState.zeros(4, 2, 3, beta=1e6, rho=1.0)
        update_z(srv, rng.standard_normal(srv.shape))
        np.testing.assert_allclose(srv.z, 0.0, atol=1e-12)

    def test_single_client_matches_svt(self, rng):
        """Test m = 1 matches matrix SVT at beta / rho"""
        srv = ServerState.zeros(5, 3, 1, beta=0.6, rho=1.5)
        w = rng.standard_normal(srv.shape)
        update_z(srv, w)
        np.testing.assert_allclose(srv.z[:, :, 0], matrix_svt(w[:, :, 0], 0.6 / 1.5), atol=1e-10)

    def test_perturbations_do_not_lower_prox_objective(self, rng):
        """Test random perturbations of Z never lower the prox objective"""
        srv = ServerState.zeros(4, 3, 3, beta=0.3, rho=1.0)
        srv.y = rng.standard_normal(srv.shape) * 0.2
        w = rng.standard_normal(srv.shape)
        target = w + srv.y / srv.rho
        z = update_z(srv, w)
        np.testing.assert_array_equal(srv.last_input, target)
        base = prox_objective(z, target, srv.beta, srv.rho, srv.p)
        for _ in range(100):
            delta = rng.standard_normal(z.shape)
            delta *= 1e-3 / np.linalg.norm(delta)
            assert prox_objective(z + delta, target, srv.beta, srv.rho, srv.p) >= base - 1e-12

    def test_shape_checked(self, rng):
        """Test a W stack of the wrong shape is rejected"""
        srv = ServerState.zeros(4, 2, 3, beta=0.1, rho=1.0)
        with pytest.raises(DimensionMismatchError):
            update_z(srv, rng.standard_normal((4, 2, 2)))


# ============== Dual Ascent Tests ==============

class TestUpdateY:
    """Test update_y"""

    def test_consensus_leaves_y(self, rng):
        """Test W = Z leaves Y unchanged"""
        srv = ServerState.zeros(3, 2, 2, beta=0.1, rho=1.0)
        srv.y = rng.standard_normal(srv.shape)
        srv.z = rng.standard_normal(srv.shape)
        before = srv.y.copy()
        update_y(srv, srv.z.copy())
        np.testing.assert_array_equal(srv.y, before)

    def test_all_ones_gap(self):
        """Test a unit gap moves Y by rho"""
        srv = ServerState.zeros(2, 2, 2, beta=0.1, rho=2.0)
        update_y(srv, np.ones(srv.shape))
        np.testing.assert_array_equal(srv.y, 2.0 * np.ones(srv.shape))

    def test_norm_identity(self, rng):
        """Test the Y step has norm rho times the primal residual"""
        srv = ServerState.zeros(4, 3, 3, beta=0.1, rho=1.7)
        srv.y = rng.standard_normal(srv.shape)
        srv.z = rng.standard_normal(srv.shape)
        w = rng.standard_normal(srv.shape)
        before = srv.y.copy()
        update_y(srv, w)
        assert np.linalg.norm(srv.y - before) == pytest.approx(1.7 * primal_residual(w, srv.z), abs=1e-12)


# ============== Residual Tests ==============

class TestResiduals:
    """Test primal_residual and dual_residual"""

    def test_equal_tensors(self, rng):
        """Test equal tensors have zero residual"""
        w = rng.standard_normal((3, 2, 2))
        assert primal_residual(w, w.copy()) == 0.0

    def test_single_entry(self):
        """Test a single nonzero entry gives its magnitude"""
        w = np.zeros((2, 2, 2))
        w[1, 0, 1] = 3.0
        assert primal_residual(w, np.zeros_like(w)) == 3.0

    def test_slice_wise_oracle(self, rng):
        """Test the primal residual against slice-wise sums"""
        w, z = rng.standard_normal((4, 3, 5)), rng.standard_normal((4, 3, 5))
        oracle = np.sqrt(sum(np.sum((w[:, :, t] - z[:, :, t]) ** 2) for t in range(5)))
        assert primal_residual(w, z) == pytest.approx(oracle, abs=1e-12)

    def test_dual_residual_definition(self, rng):
        """Test the dual residual is rho times the Z change"""
        z_new, z_old = rng.standard_normal((3, 2, 2)), rng.standard_normal((3, 2, 2))
        assert dual_residual(z_new, z_old, 2.5) == pytest.approx(2.5 * np.linalg.norm(z_new - z_old), abs=1e-12)

    def test_shape_mismatch(self):
        """Test tensors of different shapes are rejected"""
        with pytest.raises(DimensionMismatchError):
            primal_residual(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))
