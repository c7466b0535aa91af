"""
Tests for the mode-3 Fourier transform, generalised soft thresholding and the
tensor singular value thresholding operator.
"""
import logging

import numpy as np
import pytest

from main.exceptions import InvalidParameterError
from tensor.tsvt import (
    gst_shrink,
    gst_threshold,
    mode3_fft,
    mode3_ifft,
    prox_objective,
    schatten_p_norm,
    stack_slices,
    tsvt,
)


def matrix_svt(mat, tau):
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    return (u * np.maximum(s - tau, 0.0)) @ vh


def grid_minimizer(y, tau, p, step=1e-6):
    grid = np.arange(0.0, y + step, step)
    values = tau * grid ** p + 0.5 * (grid - y) ** 2
    return grid[np.argmin(values)]


# ============== Fourier Transform Tests ==============

class TestMode3Fft:
    """Test mode3_fft / mode3_ifft"""

    def test_single_slice_is_identity(self, rng):
        """Test m = 1 leaves the tensor unchanged"""
        t = rng.standard_normal((3, 2, 1))
        np.testing.assert_array_equal(mode3_fft(t), t.astype(complex))

    def test_two_point_tube(self):
        """Test a tube of ones transforms to [2, 0]"""
        t = np.ones((1, 1, 2))
        np.testing.assert_allclose(mode3_fft(t)[0, 0, :], [2.0, 0.0])

    def test_round_trip(self, rng):
        """Test the inverse transform recovers the tensor"""
        t = rng.standard_normal((3, 2, 4))
        np.testing.assert_allclose(mode3_ifft(mode3_fft(t)), t, atol=1e-12)

    def test_conjugate_symmetry(self, rng):
        """Test slices t and m - t are conjugates for real input"""
        spectral = mode3_fft(rng.standard_normal((2, 3, 5)))
        for idx in range(5):
            np.testing.assert_allclose(spectral[:, :, idx], np.conj(spectral[:, :, (5 - idx) % 5]), atol=1e-12)


# ============== Scalar Shrinkage Tests ==============

class TestGstShrink:
    """Test gst_shrink"""

    def test_soft_threshold(self):
        """Test p = 1 is soft thresholding"""
        assert gst_shrink(3.0, 1.0, 1.0) == pytest.approx(2.0)

    def test_small_input_shrinks_to_zero(self):
        """Test inputs below the threshold map to zero"""
        assert gst_shrink(0.1, 1.0, 0.5) == 0.0
        assert grid_minimizer(0.1, 1.0, 0.5) == 0.0

    @pytest.mark.parametrize('p', [0.5, 0.7, 1.0])
    @pytest.mark.parametrize('y', [0.5, 3.0, 5.0])
    def test_matches_grid_search(self, y, p):
        """Test the shrinkage against a 1-D grid search"""
        assert gst_shrink(y, 1.0, p) == pytest.approx(grid_minimizer(y, 1.0, p), abs=1e-4)

    def test_monotone_in_y(self):
        """Test the shrinkage is non-decreasing in y"""
        for p in (0.3, 0.5, 0.8, 1.0):
            grid = np.linspace(0.0, 6.0, 601)
            values = gst_shrink(grid, 0.8, p)
            assert np.all(np.diff(values) >= -1e-12)

    def test_threshold_reduces_to_tau_for_p_one(self):
        """Test the threshold equals tau when p = 1"""
        assert gst_threshold(0.7, 1.0) == 0.7

    def test_invalid_p(self):
        """Test p outside (0, 1] is rejected"""
        with pytest.raises(InvalidParameterError):
            gst_shrink(1.0, 1.0, 0.0)
        with pytest.raises(InvalidParameterError):
            gst_shrink(1.0, 1.0, 1.5)

    def test_negative_input_rejected(self):
        """Test negative singular values are rejected"""
        with pytest.raises(InvalidParameterError):
            gst_shrink(-1.0, 1.0, 1.0)


# ============== TSVT Tests ==============

class TestTsvt:
    """Test tsvt"""

    def test_zero_beta_is_identity(self, rng):
        """Test beta = 0 returns the input"""
        t = rng.standard_normal((4, 3, 3))
        np.testing.assert_array_equal(tsvt(t, 0.0, 1.0), t)

    def test_diagonal_matrix_case(self):
        """Test diag(3, 1) at threshold 2 gives diag(1, 0)"""
        m_in = np.diag([3.0, 1.0])[:, :, None]
        np.testing.assert_allclose(tsvt(m_in, beta=2.0, rho=1.0)[:, :, 0], np.diag([1.0, 0.0]), atol=1e-12)

    def test_single_slice_matches_matrix_svt(self, rng):
        """Test m = 1 matches matrix SVT on random inputs"""
        for _ in range(100):
            mat = rng.standard_normal((5, 3))
            beta, rho = rng.uniform(0.05, 2.0), rng.uniform(0.5, 3.0)
            result = tsvt(mat[:, :, None], beta, rho)[:, :, 0]
            np.testing.assert_allclose(result, matrix_svt(mat, beta / rho), atol=1e-10)

    def test_full_shrinkage(self, rng):
        """Test a threshold above every singular value gives zero"""
        t = rng.standard_normal((3, 2, 4))
        largest = max(np.linalg.svd(s, compute_uv=False)[0] for s in np.moveaxis(mode3_fft(t), 2, 0))
        np.testing.assert_allclose(tsvt(t, beta=2 * largest, rho=1.0), 0.0, atol=1e-12)

    @pytest.mark.parametrize('p', [1.0, 0.5])
    def test_perturbations_do_not_lower_prox_objective(self, rng, p):
        """Test random perturbations never lower the prox objective"""
        m_in = rng.standard_normal((4, 3, 3))
        beta, rho = 0.4, 1.3
        z = tsvt(m_in, beta, rho, p)
        base = prox_objective(z, m_in, beta, rho, p)
        for _ in range(100):
            delta = rng.standard_normal(z.shape)
            delta *= 1e-3 / np.linalg.norm(delta)
            assert prox_objective(z + delta, m_in, beta, rho, p) >= base - 1e-12

    def test_nonexpansive(self, rng):
        """Test the p = 1 prox is nonexpansive"""
        for _ in range(20):
            a = rng.standard_normal((4, 3, 5))
            b = rng.standard_normal((4, 3, 5))
            gap = np.linalg.norm(tsvt(a, 0.5, 1.0) - tsvt(b, 0.5, 1.0))
            assert gap <= np.linalg.norm(a - b) + 1e-12

    def test_real_output(self, rng, caplog):
        """Test the output is real without imaginary residue warnings"""
        with caplog.at_level(logging.WARNING, logger='tensor.tsvt'):
            for m in (1, 2, 3, 4, 7):
                out = tsvt(rng.standard_normal((4, 3, m)), 0.3, 1.0)
                assert out.dtype == np.float64
        assert not [r for r in caplog.records if 'imaginary' in r.getMessage().lower()]

    def test_rho_must_be_positive(self, rng):
        """Test rho = 0 is rejected"""
        with pytest.raises(InvalidParameterError):
            tsvt(rng.standard_normal((2, 2, 2)), 0.1, 0.0)


# ============== Schatten Norm Tests ==============

class TestSchattenPNorm:
    """Test schatten_p_norm"""

    def test_zero_tensor(self):
        """Test the zero tensor has value 0"""
        assert schatten_p_norm(np.zeros((3, 2, 4))) == 0.0

    def test_diagonal_matrix(self):
        """Test diag(3, 4) has nuclear norm 7"""
        assert schatten_p_norm(np.diag([3.0, 4.0])[:, :, None], 1.0) == pytest.approx(7.0)

    def test_two_slices_against_explicit_dft(self, rng):
        """Test the value against an explicit two-point DFT"""
        t = rng.standard_normal((4, 3, 2))
        first, second = t[:, :, 0] + t[:, :, 1], t[:, :, 0] - t[:, :, 1]
        expected = 0.5 * (np.linalg.norm(first, 'nuc') + np.linalg.norm(second, 'nuc'))
        assert schatten_p_norm(t, 1.0) == pytest.approx(expected, abs=1e-8)

    def test_stack_slices_orientation(self, rng):
        """Test stacked matrices become frontal slices"""
        mats = [rng.standard_normal((4, 2)) for _ in range(3)]
        t = stack_slices(mats)
        assert t.shape == (4, 2, 3)
        np.testing.assert_array_equal(t[:, :, 1], mats[1])
