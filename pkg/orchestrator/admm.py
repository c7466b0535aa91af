"""
Federated multi-task clustering solved by consensus ADMM.

Each round: the server broadcasts (Z_t, Y_t); every client updates W_t and
then F_t; the server gathers the W_t, updates Z by TSVT and ascends on Y.
Client weights omega_t are fixed at 1/m and never adapted.
"""
import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from clients.state import ClientState, local_objective, update_f, update_w, w_stationarity_residual
from clustering.kmeans import assign_labels
from graph.laplacian import AUTO, as_data_matrix, client_laplacian
from main.exceptions import DimensionMismatchError, FmtcError, InvalidParameterError
from metrics.scores import evaluate, mean_scores
from orchestrator.trace import ConvergenceTrace, RoundRecord
from server.consensus import ServerState, dual_residual, primal_residual, update_y, update_z
from tensor.tsvt import prox_objective, schatten_p_norm, stack_slices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HyperParams:
    alpha: float = 1.0
    beta: float = 0.1
    rho: float = 1.0
    p: float = 1.0
    clusters: int = 3
    knn_k: int = 10
    sigma: object = AUTO
    eta: float = 0.1
    inner_iters: int = 5
    max_rounds: int = 200
    tol_primal: float = 1e-6
    tol_obj: float = 1e-8
    seed: int = 7

    def __post_init__(self):
        checks = [
            (self.alpha >= 0, 'alpha must be non-negative'),
            (self.beta >= 0, 'beta must be non-negative'),
            (self.rho > 0, 'rho must be positive'),
            (0 < self.p <= 1, 'p must lie in (0, 1]'),
            (int(self.clusters) == self.clusters and self.clusters >= 2, 'clusters must be an integer >= 2'),
            (int(self.knn_k) == self.knn_k and self.knn_k >= 1, 'knn_k must be a positive integer'),
            (self.eta > 0, 'eta must be positive'),
            (int(self.inner_iters) == self.inner_iters and self.inner_iters >= 1, 'inner_iters must be >= 1'),
            (int(self.max_rounds) == self.max_rounds and self.max_rounds >= 0, 'max_rounds must be >= 0'),
            (self.tol_primal > 0, 'tol_primal must be positive'),
            (self.tol_obj > 0, 'tol_obj must be positive'),
        ]
        for ok, message in checks:
            if not ok:
                raise InvalidParameterError(f"{message} (got {dataclasses.asdict(self)})")
        if not (isinstance(self.sigma, str) and self.sigma.lower() == AUTO):
            try:
                sigma = float(self.sigma)
            except (TypeError, ValueError):
                sigma = None
            if sigma is None or not sigma > 0:
                raise InvalidParameterError(f"sigma must be positive or '{AUTO}', got {self.sigma!r}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class FmtcModel:
    clients: list
    server: ServerState
    hyper: HyperParams
    trace: ConvergenceTrace = field(default_factory=ConvergenceTrace)
    converged: bool = False

    @property
    def m(self):
        return len(self.clients)

    @property
    def z(self):
        return self.server.z

    @property
    def y(self):
        return self.server.y

    def w_stack(self):
        return stack_slices([client.w for client in self.clients])


@dataclass
class ClientUpdate:
    """What one client produced in one round, with the inputs its W-update used."""
    round: int
    client: int
    w: np.ndarray
    f: np.ndarray
    f_before: np.ndarray
    z_slice: np.ndarray
    y_slice: np.ndarray


def global_objective(model, alpha=None, beta=None, p=None):
    """Sum of weighted local objectives plus beta * ||W||_Sp^p."""
    hyper = model.hyper
    alpha = hyper.alpha if alpha is None else alpha
    beta = hyper.beta if beta is None else beta
    p = hyper.p if p is None else p
    local = sum(local_objective(client, alpha) for client in model.clients)
    if beta == 0:
        return float(local)
    return float(local + beta * schatten_p_norm(model.w_stack(), p))


def augmented_lagrangian(model):
    """Augmented Lagrangian at the model's current (W, F, Z, Y)."""
    hyper = model.hyper
    w_stack = model.w_stack()
    gap = w_stack - model.server.z
    value = sum(local_objective(client, hyper.alpha) for client in model.clients)
    value += float(np.sum(model.server.y * gap))
    value += 0.5 * hyper.rho * float(np.sum(gap ** 2))
    if hyper.beta:
        value += hyper.beta * schatten_p_norm(model.server.z, hyper.p)
    return float(value)


def _validate_datasets(datasets, hyper):
    if not datasets:
        raise InvalidParameterError("At least one client dataset is required")
    matrices = []
    for idx, x in enumerate(datasets):
        try:
            x = as_data_matrix(x)
        except FmtcError as e:
            raise e.with_context(f"client {idx}") from e
        matrices.append(x)
    widths = {x.shape[1] for x in matrices}
    if len(widths) != 1:
        raise DimensionMismatchError(f"All clients must share the feature count; got {sorted(widths)}")
    for idx, x in enumerate(matrices):
        if hyper.clusters > x.shape[0]:
            raise InvalidParameterError(
                f"clusters={hyper.clusters} exceeds the {x.shape[0]} samples of client {idx}"
            )
    return matrices


def initialize(datasets, hyper):
    """Laplacians, client states and a zero server (Z = Y = 0)."""
    matrices = _validate_datasets(datasets, hyper)
    m = len(matrices)
    weight = 1.0 / m
    clients = []
    for idx, x in enumerate(matrices):
        try:
            laplacian = client_laplacian(x, hyper.knn_k, hyper.sigma)
            clients.append(ClientState.initialize(x, laplacian, hyper.clusters, weight, hyper.alpha, hyper.rho))
        except FmtcError as e:
            raise e.with_context(f"client {idx}") from e
    d = matrices[0].shape[1]
    server = ServerState.zeros(d, hyper.clusters, m, hyper.beta, hyper.rho, hyper.p)
    model = FmtcModel(clients=clients, server=server, hyper=hyper)
    model.trace.initial_lagrangian = augmented_lagrangian(model)
    model.trace.initial_objective = global_objective(model)
    return model


def _client_step(model, round_idx, client_idx):
    hyper = model.hyper
    state = model.clients[client_idx]
    z_slice, y_slice = model.server.broadcast(client_idx)
    try:
        w = update_w(state, z_slice, y_slice, hyper.alpha, hyper.rho)
        f = update_f(state, w, hyper.alpha, hyper.eta, hyper.inner_iters)
    except FmtcError as e:
        raise e.with_context(f"round {round_idx}, client {client_idx}") from e
    return ClientUpdate(
        round=round_idx, client=client_idx, w=w, f=f,
        f_before=state.f, z_slice=z_slice, y_slice=y_slice,
    )


def _round_metrics(model, labels, restarts):
    scores = []
    for idx, (client, truth) in enumerate(zip(model.clients, labels)):
        if truth is None:
            continue
        result = assign_labels(client.f, model.hyper.clusters, restarts=restarts, seed=model.hyper.seed + idx)
        scores.append(evaluate(result.labels, truth))
    return mean_scores(scores) or None


def fit(
    datasets,
    hyper,
    labels=None,
    parallel=False,
    workers=None,
    record_wall_time=True,
    trace_metrics=False,
    metric_restarts=10,
    on_client_update: Optional[Callable] = None,
):
    """
    Run the federated ADMM rounds until primal residual <= tol_primal and the
    relative Lagrangian change <= tol_obj, or max_rounds.

    Args:
        datasets: one n_t x d matrix per client.
        hyper: HyperParams.
        labels: optional per-client ground truth, used only for trace metrics.
        parallel: update clients concurrently within a round.
        on_client_update: called as on_client_update(ClientUpdate, state) in
            client order before the update is applied.
    """
    model = initialize(datasets, hyper)
    if labels is not None and len(labels) != model.m:
        raise DimensionMismatchError(f"Got {len(labels)} label vectors for {model.m} clients")

    logger.info(
        f"Starting FMTC fit: m={model.m}, d={model.server.shape[0]}, c={hyper.clusters}, "
        f"alpha={hyper.alpha}, beta={hyper.beta}, rho={hyper.rho}, p={hyper.p}"
    )
    executor = ThreadPoolExecutor(max_workers=workers) if parallel and model.m > 1 else None
    previous_lagrangian = model.trace.initial_lagrangian
    try:
        for round_idx in range(hyper.max_rounds):
            started = time.perf_counter()
            z_old = model.server.z.copy()
            w_old = model.w_stack()
            f_old = [client.f for client in model.clients]

            if executor is not None:
                updates = list(executor.map(lambda t: _client_step(model, round_idx, t), range(model.m)))
            else:
                updates = [_client_step(model, round_idx, t) for t in range(model.m)]
            for update, client in zip(updates, model.clients):
                if on_client_update is not None:
                    on_client_update(update, client)
                client.w, client.f = update.w, update.f

            w_stack = model.w_stack()
            try:
                update_z(model.server, w_stack)
            except FmtcError as e:
                raise e.with_context(f"round {round_idx}, server") from e
            lagrangian_primal = augmented_lagrangian(model)
            update_y(model.server, w_stack)

            record = RoundRecord(
                round=round_idx,
                objective=global_objective(model),
                lagrangian=augmented_lagrangian(model),
                lagrangian_primal=lagrangian_primal,
                primal_residual=primal_residual(w_stack, model.server.z),
                dual_residual=dual_residual(model.server.z, z_old, hyper.rho),
                w_change=float(np.linalg.norm((w_stack - w_old).ravel())),
                f_change=float(np.sqrt(sum(np.sum((c.f - f) ** 2) for c, f in zip(model.clients, f_old)))),
            )
            if trace_metrics and labels is not None:
                record.metrics = _round_metrics(model, labels, metric_restarts)
            if record_wall_time:
                record.wall_time = time.perf_counter() - started
            model.trace.append(record)
            logger.debug(
                f"Round {round_idx}: objective={record.objective:.10g} lagrangian={record.lagrangian:.10g} "
                f"primal={record.primal_residual:.3e} dual={record.dual_residual:.3e}"
            )

            change = abs(record.lagrangian - previous_lagrangian)
            previous_lagrangian = record.lagrangian
            if (
                record.primal_residual <= hyper.tol_primal
                and change <= hyper.tol_obj * (1.0 + abs(record.lagrangian))
            ):
                model.converged = True
                logger.info(f"Converged after {round_idx + 1} rounds (primal residual {record.primal_residual:.3e})")
                break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    if hyper.max_rounds and not model.converged:
        last = model.trace.last
        logger.warning(
            f"Stopped at max_rounds={hyper.max_rounds} without converging "
            f"(primal residual {last.primal_residual:.3e})"
        )
    return model


def prox_probe(model, probes=100, magnitude=1e-3, seed=0):
    """
    Perturb Z in random directions of Frobenius norm `magnitude` and count how
    often the Z-subproblem objective decreases. Zero means Z passes the probe.
    """
    hyper = model.hyper
    target = model.server.last_input
    if target is None:
        return 0
    z = model.server.z
    base = prox_objective(z, target, hyper.beta, hyper.rho, hyper.p)
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(probes):
        delta = rng.standard_normal(z.shape)
        delta *= magnitude / np.linalg.norm(delta.ravel())
        if prox_objective(z + delta, target, hyper.beta, hyper.rho, hyper.p) < base - 1e-12:
            failures += 1
    return failures


def kkt_report(model, last_updates=None, probes=100, magnitude=1e-3, seed=0):
    """
    Checkable stationarity conditions at a returned model.

    Args:
        last_updates: the ClientUpdate objects of the final round; when given,
            the W-stationarity residual is evaluated at the inputs those
            W-updates used.
    """
    hyper = model.hyper
    report = {
        'primal_residual': primal_residual(model.w_stack(), model.server.z),
        'max_client_primal_residual': max(
            float(np.linalg.norm(client.w - model.server.z[:, :, idx])) for idx, client in enumerate(model.clients)
        ) if model.clients else 0.0,
        'prox_probe_failures': prox_probe(model, probes=probes, magnitude=magnitude, seed=seed),
    }
    if last_updates:
        report['w_stationarity'] = max(
            w_stationarity_residual(
                dataclasses.replace(model.clients[u.client], f=u.f_before),
                u.w, u.z_slice, u.y_slice, hyper.alpha, hyper.rho,
            )
            for u in last_updates
        )
    # limit form: 2 omega alpha X^T (X W - F) + Y_t = 0 once W = Z
    report['limit_stationarity'] = max(
        float(np.linalg.norm(
            2.0 * client.weight * hyper.alpha * client.x.T @ (client.x @ client.w - client.f)
            + model.server.y[:, :, idx]
        ))
        for idx, client in enumerate(model.clients)
    ) if model.clients else 0.0
    return report
