"""
Tests for the federated ADMM loop: hyperparameters, convergence on the blob
benchmark, descent and stationarity checks, determinism and the trace.
"""
import dataclasses

import numpy as np
import pytest

from clients.state import ClientState, local_objective, update_f, update_w, w_stationarity_residual
from clustering.kmeans import assign_labels
from conftest import HyperParamsFactory, SyntheticSpecFactory
from experiments.datasets import generate_synthetic
from graph.laplacian import client_laplacian
from main.exceptions import DegenerateDataError, DimensionMismatchError, InvalidParameterError
from metrics.scores import accuracy
from orchestrator.admm import (
    HyperParams,
    augmented_lagrangian,
    fit,
    global_objective,
    initialize,
    kkt_report,
)
from orchestrator.trace import ConvergenceTrace, RoundRecord, TRACE_FIELDS
from tensor.tsvt import schatten_p_norm, stack_slices


def record(round_idx, lagrangian, lagrangian_primal):
    return RoundRecord(
        round=round_idx, objective=0.0, lagrangian=lagrangian, lagrangian_primal=lagrangian_primal,
        primal_residual=0.0, dual_residual=0.0,
    )


# ============== HyperParams Tests ==============

class TestHyperParams:
    """Test HyperParams validation"""

    def test_defaults(self):
        """Test default hyperparameter values"""
        hyper = HyperParams()
        assert (hyper.alpha, hyper.beta, hyper.rho, hyper.p) == (1.0, 0.1, 1.0, 1.0)
        assert hyper.max_rounds == 200
        assert hyper.tol_primal == 1e-6
        assert hyper.tol_obj == 1e-8

    @pytest.mark.parametrize('changes', [
        {'clusters': 1},
        {'rho': 0.0},
        {'p': 0.0},
        {'p': 1.2},
        {'alpha': -1.0},
        {'beta': -0.1},
        {'eta': 0.0},
        {'inner_iters': 0},
        {'max_rounds': -1},
        {'sigma': -2.0},
        {'sigma': 'wide'},
        {'sigma': None},
    ])
    def test_invalid(self, changes):
        """Test out-of-range hyperparameters raise InvalidParameterError"""
        with pytest.raises(InvalidParameterError):
            HyperParams(**changes)

    def test_replace(self):
        """Test replace returns a copy with one field changed"""
        hyper = HyperParams().replace(beta=0.5)
        assert hyper.beta == 0.5
        assert hyper.alpha == 1.0


# ============== Trace Tests ==============

class TestConvergenceTrace:
    """Test ConvergenceTrace"""

    def test_rounds_strictly_increase(self):
        """Test a repeated round index is rejected"""
        trace = ConvergenceTrace()
        trace.append(record(0, 1.0, 1.0))
        with pytest.raises(ValueError):
            trace.append(record(0, 1.0, 1.0))

    def test_descent_violations(self):
        """Test rounds whose primal half-round raises the Lagrangian are listed"""
        trace = ConvergenceTrace(initial_lagrangian=10.0)
        trace.append(record(0, 9.0, 8.0))
        trace.append(record(1, 8.5, 9.5))
        trace.append(record(2, 8.0, 8.4))
        assert trace.primal_descent_violations() == [1]

    def test_record_fields(self):
        """Test record fields keep the trace column order"""
        assert tuple(record(0, 0.0, 0.0).as_dict()) == TRACE_FIELDS


# ============== Fit Contract Tests ==============

class TestFit:
    """Test fit preconditions and trivial cases"""

    def test_zero_rounds_returns_initialization(self, blob_clients, blob_hyper):
        """Test max_rounds = 0 returns the initial model and an empty trace"""
        datasets = [x for x, _ in blob_clients]
        hyper = blob_hyper.replace(max_rounds=0)
        model = fit(datasets, hyper)
        start = initialize(datasets, hyper)
        assert len(model.trace) == 0
        assert not model.converged
        for fitted, initial in zip(model.clients, start.clients):
            np.testing.assert_array_equal(fitted.w, initial.w)
            np.testing.assert_array_equal(fitted.f, initial.f)
        assert not model.z.any()

    def test_feature_count_mismatch(self, rng):
        """Test clients with different feature counts are rejected"""
        with pytest.raises(DimensionMismatchError):
            fit([rng.standard_normal((20, 3)), rng.standard_normal((20, 4))], HyperParamsFactory(clusters=2))

    def test_too_many_clusters(self, rng):
        """Test clusters above a client's sample count is rejected"""
        with pytest.raises(InvalidParameterError):
            fit([rng.standard_normal((20, 3)), rng.standard_normal((4, 3))], HyperParamsFactory(clusters=5, knn_k=2))

    def test_errors_name_the_client(self, rng):
        """Test data errors carry the client index"""
        duplicated = np.repeat(rng.standard_normal((6, 3)), 2, axis=0)
        with pytest.raises(DegenerateDataError, match='client 1'):
            fit([rng.standard_normal((12, 3)), duplicated], HyperParamsFactory(clusters=2, knn_k=1))

    def test_no_datasets(self):
        """Test fitting no clients is rejected"""
        with pytest.raises(InvalidParameterError):
            fit([], HyperParams())

    def test_single_client_without_coupling_is_proximal_alternation(self, blob_clients):
        """m = 1, beta = 0: Y stays 0 and Z equals the last W, so each W-update is anchored there"""
        x = blob_clients[0][0]
        hyper = HyperParamsFactory(beta=0.0, max_rounds=15, tol_primal=1e-300, tol_obj=1e-300)
        seen = []
        fit([x], hyper, record_wall_time=False, on_client_update=lambda update, state: seen.append(update))

        state = ClientState.initialize(x, client_laplacian(x, hyper.knn_k), hyper.clusters, 1.0, hyper.alpha, hyper.rho)
        no_dual = np.zeros_like(state.w)
        anchor = np.zeros_like(state.w)
        for update in seen:
            w = update_w(state, anchor, no_dual, hyper.alpha, hyper.rho)
            f = update_f(state, w, hyper.alpha, hyper.eta, hyper.inner_iters)
            np.testing.assert_allclose(update.w, w, atol=1e-8)
            np.testing.assert_allclose(update.f, f, atol=1e-8)
            state.w, state.f = w, f
            anchor = w
        assert seen

    def test_trace_metrics(self, blob_clients, blob_hyper):
        """Test per-round metrics when labels are given"""
        datasets = [x for x, _ in blob_clients]
        labels = [y for _, y in blob_clients]
        model = fit(datasets, blob_hyper.replace(max_rounds=2), labels=labels, trace_metrics=True, metric_restarts=2)
        assert set(model.trace[0].metrics) == {'acc', 'nmi', 'ri'}

    def test_labels_must_match_clients(self, blob_clients, blob_hyper):
        """Test one label vector per client is required"""
        datasets = [x for x, _ in blob_clients]
        with pytest.raises(DimensionMismatchError):
            fit(datasets, blob_hyper, labels=[blob_clients[0][1]])


# ============== Blob Benchmark Tests ==============

class TestBlobConvergence:
    """Convergence behaviour on the 3-client blob benchmark"""

    def test_converges_within_fifty_rounds(self, blob_fit, blob_hyper):
        """Test the blob fit converges with W_t within tolerance of Z_t"""
        model, _ = blob_fit
        assert model.converged
        assert len(model.trace) <= 50
        assert model.trace.last.primal_residual <= blob_hyper.tol_primal
        for idx, client in enumerate(model.clients):
            assert np.linalg.norm(client.w - model.z[:, :, idx]) <= blob_hyper.tol_primal

    def test_residual_settles_early(self, blob_fit):
        """Test the primal residual is below 1e-3 by round 25"""
        model, _ = blob_fit
        if len(model.trace) > 25:
            assert model.trace[25].primal_residual <= 1e-3

    def test_lagrangian_descends_over_primal_half_round(self, blob_fit):
        """Test the Lagrangian never rises over a primal half-round"""
        model, _ = blob_fit
        assert model.trace.primal_descent_violations(slack=1e-9) == []

    def test_increments_vanish(self, blob_fit):
        """Test W and F stop moving by the final round"""
        model, _ = blob_fit
        last = model.trace.last
        assert last.w_change <= 1e-4
        assert last.f_change <= 1e-4

    def test_every_w_update_is_exact(self, blob_fit, blob_hyper):
        """Test every W-update zeroes its subproblem gradient"""
        _, updates = blob_fit
        hyper = blob_hyper
        for update, state in updates:
            before = dataclasses.replace(state, f=update.f_before)
            residual = w_stationarity_residual(before, update.w, update.z_slice, update.y_slice, hyper.alpha, hyper.rho)
            assert residual <= 1e-8

    def test_every_embedding_orthonormal(self, blob_fit):
        """Test every F produced during the fit is orthonormal"""
        model, updates = blob_fit
        for update, _ in updates:
            c = update.f.shape[1]
            assert np.linalg.norm(update.f.T @ update.f - np.eye(c)) <= 1e-8
        for client in model.clients:
            assert np.linalg.norm(client.f.T @ client.f - np.eye(client.clusters)) <= 1e-8

    def test_kkt_conditions_at_limit(self, blob_fit, blob_hyper):
        """Test feasibility, W-stationarity and the Z-prox check at the returned model"""
        model, updates = blob_fit
        last_round = [update for update, _ in updates if update.round == len(model.trace) - 1]
        report = kkt_report(model, last_updates=last_round)
        assert report['primal_residual'] <= blob_hyper.tol_primal
        assert report['w_stationarity'] <= 1e-6
        assert report['prox_probe_failures'] == 0

    def test_recovers_blob_labels(self, blob_fit, blob_clients):
        """Test k-means on each F recovers the blobs"""
        model, _ = blob_fit
        for idx, (client, (_, truth)) in enumerate(zip(model.clients, blob_clients)):
            labels = assign_labels(client.f, 3, seed=idx).labels
            assert accuracy(labels, truth) >= 0.95


# ============== Objective Tests ==============

class TestObjectives:
    """Test global_objective and augmented_lagrangian"""

    def test_no_coupling_is_sum_of_clients(self, blob_clients, blob_hyper):
        """Test beta = 0 gives the sum of local objectives"""
        model = initialize([x for x, _ in blob_clients], blob_hyper)
        expected = sum(local_objective(client, blob_hyper.alpha) for client in model.clients)
        assert global_objective(model, beta=0.0) == pytest.approx(expected, abs=1e-12)

    def test_re_evaluation_from_raw_matrices(self, rng):
        """Test the objective recomputed from raw matrices"""
        datasets = [rng.standard_normal((15, 3)) for _ in range(2)]
        hyper = HyperParamsFactory(clusters=2, knn_k=4, beta=0.3)
        model = initialize(datasets, hyper)
        total = 0.0
        for client in model.clients:
            lap, f, x, w = client.laplacian.values, client.f, client.x, client.w
            total += 0.5 * (np.trace(f.T @ lap @ f) + hyper.alpha * np.linalg.norm(f - x @ w) ** 2)
        total += 0.3 * schatten_p_norm(stack_slices([c.w for c in model.clients]), 1.0)
        assert global_objective(model) == pytest.approx(total, abs=1e-10)

    def test_lagrangian_at_zero_consensus(self, blob_clients, blob_hyper):
        """Test the starting Lagrangian is local terms plus rho / 2 ||W||^2"""
        model = initialize([x for x, _ in blob_clients], blob_hyper)
        local = sum(local_objective(client, blob_hyper.alpha) for client in model.clients)
        penalty = 0.5 * blob_hyper.rho * np.sum(model.w_stack() ** 2)
        assert augmented_lagrangian(model) == pytest.approx(local + penalty, abs=1e-10)
        assert model.trace.initial_lagrangian == pytest.approx(local + penalty, abs=1e-10)


# ============== Determinism Tests ==============

class TestDeterminism:
    """Repeated fits with the same inputs"""

    def test_sequential_fits_identical(self, blob_clients):
        """Test two sequential fits give identical traces"""
        datasets = [x for x, _ in blob_clients]
        hyper = HyperParamsFactory(max_rounds=10)
        first = fit(datasets, hyper, record_wall_time=False)
        second = fit(datasets, hyper, record_wall_time=False)
        assert [r.as_dict() for r in first.trace] == [r.as_dict() for r in second.trace]

    def test_parallel_matches_sequential(self, blob_clients):
        """Test the threaded fit matches the sequential one"""
        datasets = [x for x, _ in blob_clients]
        hyper = HyperParamsFactory(max_rounds=10)
        sequential = fit(datasets, hyper, record_wall_time=False)
        parallel = fit(datasets, hyper, parallel=True, workers=3, record_wall_time=False)
        for a, b in zip(sequential.trace, parallel.trace):
            for name in ('objective', 'lagrangian', 'primal_residual', 'dual_residual'):
                assert getattr(a, name) == pytest.approx(getattr(b, name), abs=1e-12)


# ============== Collaboration Tests ==============

class TestCollaboration:
    """Coupling through the tensor regulariser on heterogeneous clients"""

    def test_coupling_does_not_hurt_accuracy(self):
        """Test beta > 0 matches or beats beta = 0 on shifted clients over 5 seeds"""
        coupled, independent = [], []
        for seed in range(5):
            spec = SyntheticSpecFactory(samples=30, separation=6.0, mean_shift=2.0, seed=seed)
            clients = generate_synthetic(spec)
            datasets = [x for x, _ in clients]
            for beta, bucket in ((0.1, coupled), (0.0, independent)):
                model = fit(datasets, HyperParamsFactory(beta=beta, max_rounds=30, seed=seed), record_wall_time=False)
                bucket.append(np.mean([
                    accuracy(assign_labels(client.f, 3, seed=idx).labels, truth)
                    for idx, (client, (_, truth)) in enumerate(zip(model.clients, clients))
                ]))
        assert np.mean(coupled) >= np.mean(independent) - 1e-12
