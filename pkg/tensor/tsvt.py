"""
Third-order tensor machinery for the consensus update.

Tensors are d x k x m numpy arrays whose frontal slice [:, :, t] is client t's
model. Norms follow the t-SVD convention: the tensor Schatten-p value is
(1/m) times the sum over mode-3 Fourier slices of sum_i sigma_i^p. Under that
normalisation Parseval turns
    beta * ||Z||_Sp^p + rho/2 * ||Z - M||_F^2
into m independent slice problems with the same threshold beta/rho, so m = 1
is exactly matrix singular value thresholding.
"""
import logging

import numpy as np

from main.exceptions import ConsistencyError, InvalidParameterError

logger = logging.getLogger(__name__)

IMAG_DISCARD_TOL = 1e-10
IMAG_ERROR_TOL = 1e-8
GST_MAX_ITER = 50
GST_TOL = 1e-12


def as_tensor3(t):
    t = np.asarray(t, dtype=float)
    if t.ndim != 3 or min(t.shape) < 1:
        raise InvalidParameterError(f"Expected a non-empty 3-D tensor, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvalidParameterError("Tensor contains non-finite entries")
    return t


def stack_slices(matrices):
    """Stack equally shaped d x k matrices into a d x k x m tensor."""
    return np.stack([np.asarray(mat, dtype=float) for mat in matrices], axis=2)


def mode3_fft(t):
    """DFT of every tube t[i, j, :]."""
    return np.fft.fft(as_tensor3(t), axis=2)


def mode3_ifft(spectral):
    """
    Inverse of mode3_fft returning a real tensor.

    Raises:
        ConsistencyError: the imaginary residue exceeds IMAG_ERROR_TOL.
    """
    values = np.fft.ifft(spectral, axis=2)
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > IMAG_ERROR_TOL:
        raise ConsistencyError(f"Imaginary residue {residue:.3e} after inverse FFT exceeds {IMAG_ERROR_TOL}")
    if residue > IMAG_DISCARD_TOL:
        logger.warning(f"Discarding imaginary residue {residue:.3e} after inverse FFT")
    return np.ascontiguousarray(values.real)


def _check_p(p):
    if not 0 < p <= 1:
        raise InvalidParameterError(f"Schatten exponent p must lie in (0, 1], got {p!r}")


def gst_threshold(tau, p):
    """Smallest y for which the minimiser of tau*x^p + (x - y)^2/2 is non-zero."""
    if p == 1:
        return tau
    base = 2.0 * tau * (1.0 - p)
    return base ** (1.0 / (2.0 - p)) + tau * p * base ** ((p - 1.0) / (2.0 - p))


def gst_shrink(y, tau, p):
    """
    Global minimiser of tau * x^p + (x - y)^2 / 2 over x >= 0 (generalised soft thresholding).

    Accepts a scalar or an array of non-negative values.
    """
    _check_p(p)
    if tau < 0:
        raise InvalidParameterError(f"tau must be non-negative, got {tau!r}")
    values = np.asarray(y, dtype=float)
    if np.any(values < 0):
        raise InvalidParameterError("gst_shrink expects non-negative inputs")

    if tau == 0:
        result = values.copy()
    elif p == 1:
        result = np.maximum(values - tau, 0.0)
    else:
        result = np.zeros_like(values)
        active = values > gst_threshold(tau, p)
        if np.any(active):
            target = values[active]
            x = target.copy()
            for _ in range(GST_MAX_ITER):
                updated = target - tau * p * x ** (p - 1.0)
                step = np.max(np.abs(updated - x))
                x = updated
                if step < GST_TOL:
                    break
            result[active] = x

    if np.ndim(y) == 0:
        return float(result)
    return result


def _half_spectrum(m):
    return m // 2 + 1


def tsvt(m_in, beta, rho, p=1.0):
    """
    Proximal operator of the tensor Schatten-p norm.

    Returns argmin_Z beta * ||Z||_Sp^p + rho/2 * ||Z - m_in||_F^2.
    Only the first m//2 + 1 Fourier slices are decomposed; the rest are
    conjugate mirrors.
    """
    _check_p(p)
    if not rho > 0:
        raise InvalidParameterError(f"rho must be positive, got {rho!r}")
    if beta < 0:
        raise InvalidParameterError(f"beta must be non-negative, got {beta!r}")
    m_in = as_tensor3(m_in)
    if beta == 0:
        return m_in.copy()

    tau = beta / rho
    m = m_in.shape[2]
    spectral = mode3_fft(m_in)
    half = _half_spectrum(m)

    # batch SVD over the leading Fourier slices, slice index first
    slices = np.moveaxis(spectral[:, :, :half], 2, 0)
    u, s, vh = np.linalg.svd(slices, full_matrices=False)
    shrunk = gst_shrink(s, tau, p)
    rebuilt = np.einsum('tik,tk,tkj->tij', u, shrunk, vh)

    out = np.empty_like(spectral)
    out[:, :, :half] = np.moveaxis(rebuilt, 0, 2)
    for idx in range(1, half):
        mirror = m - idx
        if mirror != idx:
            out[:, :, mirror] = np.conj(out[:, :, idx])
    # the DC slice (and the Nyquist slice for even m) is real for real input
    out[:, :, 0] = out[:, :, 0].real
    if m % 2 == 0:
        out[:, :, m // 2] = out[:, :, m // 2].real
    return mode3_ifft(out)


def schatten_p_norm(t, p=1.0):
    """(1/m) * sum over Fourier slices of sum_i sigma_i^p."""
    _check_p(p)
    t = as_tensor3(t)
    m = t.shape[2]
    slices = np.moveaxis(mode3_fft(t), 2, 0)
    singular = np.linalg.svd(slices, compute_uv=False)
    return float(np.sum(singular ** p) / m)


def prox_objective(z, m_in, beta, rho, p=1.0):
    """beta * ||Z||_Sp^p + rho/2 * ||Z - m_in||_F^2."""
    return beta * schatten_p_norm(z, p) + 0.5 * rho * float(np.sum((z - m_in) ** 2))
