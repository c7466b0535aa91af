"""
Federated server: consensus Z-update through TSVT and dual ascent on Y.

Operations here accept only model tensors stacked from client W_t matrices;
nothing in this module takes client data.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from main.exceptions import DimensionMismatchError, InvalidParameterError
from tensor.tsvt import as_tensor3, tsvt

logger = logging.getLogger(__name__)


@dataclass
class ServerState:
    z: np.ndarray
    y: np.ndarray
    beta: float
    rho: float
    p: float = 1.0
    last_input: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def zeros(cls, d, k, m, beta, rho, p=1.0):
        if not rho > 0:
            raise InvalidParameterError(f"rho must be positive, got {rho!r}")
        if beta < 0:
            raise InvalidParameterError(f"beta must be non-negative, got {beta!r}")
        return cls(z=np.zeros((d, k, m)), y=np.zeros((d, k, m)), beta=float(beta), rho=float(rho), p=float(p))

    @property
    def shape(self):
        return self.z.shape

    def broadcast(self, client_index):
        """(Z_t, Y_t) sent to client t at the start of a round."""
        return self.z[:, :, client_index].copy(), self.y[:, :, client_index].copy()


def _check_stack(srv, w_stack):
    w_stack = as_tensor3(w_stack)
    if w_stack.shape != srv.shape:
        raise DimensionMismatchError(f"Model tensor has shape {w_stack.shape}, server expects {srv.shape}")
    return w_stack


def update_z(srv, w_stack):
    """Z <- tsvt(W + Y/rho, beta, rho, p); stored on the server and returned."""
    w_stack = _check_stack(srv, w_stack)
    srv.last_input = w_stack + srv.y / srv.rho
    srv.z = tsvt(srv.last_input, srv.beta, srv.rho, srv.p)
    return srv.z


def update_y(srv, w_stack):
    """Y <- Y + rho (W - Z), applied after update_z in the same round."""
    w_stack = _check_stack(srv, w_stack)
    srv.y = srv.y + srv.rho * (w_stack - srv.z)
    return srv.y


def primal_residual(w_stack, z):
    """||W - Z||_F over the whole tensor."""
    w_stack = np.asarray(w_stack, dtype=float)
    z = np.asarray(z, dtype=float)
    if w_stack.shape != z.shape:
        raise DimensionMismatchError(f"Shapes differ: {w_stack.shape} vs {z.shape}")
    return float(np.linalg.norm((w_stack - z).ravel()))


def dual_residual(z_new, z_old, rho):
    """rho * ||Z^{k+1} - Z^k||_F."""
    return float(rho * np.linalg.norm((np.asarray(z_new) - np.asarray(z_old)).ravel()))
