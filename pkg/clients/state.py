"""
One federated client: local data, Laplacian and model (W_t, F_t), plus the
two local sub-updates of each ADMM round.

Only `w` ever leaves a client; the server never sees `x`, `f` or the Laplacian.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from graph.laplacian import NormalizedLaplacian, as_data_matrix, spectral_embedding
from main.exceptions import (
    DegenerateProjectionError,
    DimensionMismatchError,
    InvalidParameterError,
    NumericalError,
)

logger = logging.getLogger(__name__)

STIEFEL_RANK_TOL = 1e-12
MAX_HALVINGS = 20


@dataclass
class ClientState:
    """Mutable per-client state; owned by exactly one worker at a time."""
    x: np.ndarray
    laplacian: NormalizedLaplacian
    w: np.ndarray
    f: np.ndarray
    weight: float
    gram: np.ndarray
    alpha: float
    rho: float
    factor: tuple = field(repr=False)

    @property
    def n_samples(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]

    @property
    def clusters(self):
        return self.f.shape[1]

    @classmethod
    def initialize(cls, x, laplacian, clusters, weight, alpha, rho):
        """
        Spectral-embedding start for F_t and a ridge fit of it for W_t.

        F_t^0 is the bottom-`clusters` eigenvectors of L̂_t; W_t^0 solves the
        W-update with Z_t = Y_t = 0.
        """
        x = as_data_matrix(x)
        if laplacian.size != x.shape[0]:
            raise DimensionMismatchError(
                f"Laplacian size {laplacian.size} does not match {x.shape[0]} samples"
            )
        if clusters > x.shape[0]:
            raise InvalidParameterError(f"clusters={clusters} exceeds the {x.shape[0]} local samples")
        if not weight > 0:
            raise InvalidParameterError(f"Client weight must be positive, got {weight!r}")

        gram = x.T @ x
        factor = factorize(gram, weight, alpha, rho)
        f = spectral_embedding(laplacian, clusters)
        w = cho_solve(factor, 2.0 * weight * alpha * (x.T @ f))
        return cls(
            x=x, laplacian=laplacian, w=w, f=f, weight=float(weight),
            gram=gram, alpha=float(alpha), rho=float(rho), factor=factor,
        )

    def ensure_factor(self, alpha, rho):
        """Refactorise only when (alpha, rho) differ from the cached pair."""
        if alpha != self.alpha or rho != self.rho:
            logger.debug(f"Refactorising client system for alpha={alpha}, rho={rho}")
            self.factor = factorize(self.gram, self.weight, alpha, rho)
            self.alpha = float(alpha)
            self.rho = float(rho)
        return self.factor


def factorize(gram, weight, alpha, rho):
    """Cholesky factor of 2*omega*alpha*X^T X + rho*I."""
    if not rho > 0:
        raise InvalidParameterError(f"rho must be positive, got {rho!r}")
    if alpha < 0:
        raise InvalidParameterError(f"alpha must be non-negative, got {alpha!r}")
    system = 2.0 * weight * alpha * gram + rho * np.eye(gram.shape[0])
    try:
        return cho_factor(system, lower=True)
    except LinAlgError as e:
        raise NumericalError(f"Cholesky factorisation of the W-system failed: {e}") from e


def _check_slice(name, mat, state):
    mat = np.asarray(mat, dtype=float)
    expected = (state.n_features, state.clusters)
    if mat.shape != expected:
        raise DimensionMismatchError(f"{name} has shape {mat.shape}, expected {expected}")
    return mat


def w_system_rhs(state, z_slice, y_slice, alpha, rho):
    return 2.0 * state.weight * alpha * (state.x.T @ state.f) + rho * z_slice - y_slice


def update_w(state, z_slice, y_slice, alpha, rho):
    """
    Closed-form W-update:
        (2 omega alpha X^T X + rho I)^{-1} (2 omega alpha X^T F + rho Z_t - Y_t)
    """
    z_slice = _check_slice('Z_t', z_slice, state)
    y_slice = _check_slice('Y_t', y_slice, state)
    factor = state.ensure_factor(alpha, rho)
    w = cho_solve(factor, w_system_rhs(state, z_slice, y_slice, alpha, rho))
    if not np.all(np.isfinite(w)):
        raise NumericalError("W-update produced non-finite values")
    return w


def w_stationarity_residual(state, w, z_slice, y_slice, alpha, rho):
    """Frobenius norm of the W-subproblem gradient at w."""
    grad = (
        2.0 * state.weight * alpha * state.x.T @ (state.x @ w - state.f)
        + y_slice
        + rho * (w - z_slice)
    )
    return float(np.linalg.norm(grad))


def stiefel_project(m):
    """
    Nearest column-orthonormal matrix to m in Frobenius norm (U V^T of the thin SVD).

    Raises:
        DegenerateProjectionError: smallest singular value below 1e-12.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise DegenerateProjectionError(f"Cannot project a {m.shape} matrix onto the Stiefel manifold")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    if s.size and s[-1] < STIEFEL_RANK_TOL:
        raise DegenerateProjectionError(
            f"Matrix is rank deficient (smallest singular value {s[-1]:.3e})"
        )
    return u @ vh


def embedding_objective(laplacian, f, target, alpha):
    """Tr(F^T (L̂ + alpha I) F) - 2 alpha Tr(F^T A)."""
    values = laplacian.values if isinstance(laplacian, NormalizedLaplacian) else laplacian
    return float(np.sum(f * (values @ f)) + alpha * np.sum(f * f) - 2.0 * alpha * np.sum(f * target))


def embedding_gradient(laplacian, f, target, alpha):
    """Euclidean gradient 2 (L̂ + alpha I) F - 2 alpha A."""
    values = laplacian.values if isinstance(laplacian, NormalizedLaplacian) else laplacian
    return 2.0 * (values @ f + alpha * f) - 2.0 * alpha * target


def update_f(state, w_new, alpha, eta=0.1, inner_iters=5, history=None):
    """
    Projected gradient descent on the Stiefel manifold for F_t.

    Each inner step halves eta (at most 20 times) until the projected
    candidate does not increase the objective; if no halving works the
    current iterate is kept and the loop stops.
    """
    if not eta > 0:
        raise InvalidParameterError(f"eta must be positive, got {eta!r}")
    if inner_iters < 1:
        raise InvalidParameterError(f"inner_iters must be at least 1, got {inner_iters!r}")

    target = state.x @ np.asarray(w_new, dtype=float)
    values = state.laplacian.values
    f = state.f
    current = embedding_objective(values, f, target, alpha)
    if history is not None:
        history.append(current)

    for _ in range(inner_iters):
        # half gradient: (L̂ + alpha I) F - alpha A
        direction = values @ f + alpha * f - alpha * target
        step = eta
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = stiefel_project(f - step * direction)
            value = embedding_objective(values, candidate, target, alpha)
            if value <= current:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            logger.debug("F-update backtracking exhausted; keeping previous iterate")
            break
        f, current = candidate, value
        if history is not None:
            history.append(current)
    return f


def local_objective(state, alpha):
    """omega_t * (Tr(F^T L̂ F) + alpha * ||F - X W||_F^2)."""
    f = state.f
    trace_term = float(np.sum(f * (state.laplacian.values @ f)))
    residual = float(np.sum((f - state.x @ state.w) ** 2))
    return state.weight * (trace_term + alpha * residual)
