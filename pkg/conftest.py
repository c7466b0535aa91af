"""
Pytest fixtures for FMTC tests.
Provides factories, the synthetic blob fixture and a fitted model shared by
the orchestrator, clustering and experiments suites.
"""
import factory
import numpy as np
import pytest
from rest_framework.test import APIClient

from experiments.config import SyntheticSpec
from experiments.datasets import generate_synthetic
from experiments.models import ExperimentRun
from orchestrator.admm import HyperParams


# ============== Factories ==============

class HyperParamsFactory(factory.Factory):
    class Meta:
        model = HyperParams

    alpha = 1.0
    # the blob benchmark settles within 50 rounds at this coupling strength
    beta = 0.01
    rho = 1.0
    p = 1.0
    clusters = 3
    knn_k = 10
    eta = 0.1
    inner_iters = 5
    max_rounds = 50
    seed = 7


class SyntheticSpecFactory(factory.Factory):
    """The 3-client blob benchmark: n=60, d=5, c=3, separation 8, seed 7."""

    class Meta:
        model = SyntheticSpec

    clients = 3
    clusters = 3
    features = 5
    samples = 60
    separation = 8.0
    mean_shift = 0.0
    seed = 7


class ExperimentRunFactory(factory.django.DjangoModelFactory):
    class Meta:
        model = ExperimentRun

    name = factory.Sequence(lambda n: f'run-{n}')
    config = factory.LazyFunction(lambda: {'schema_version': 1, 'data_paths': ['client_0.csv'], 'output_dir': 'out'})
    output_dir = factory.Sequence(lambda n: f'/tmp/fmtc-run-{n}')


# ============== Data Fixtures ==============

@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope='session')
def blob_clients():
    """[(x, labels)] for the 3-client blob benchmark."""
    return generate_synthetic(SyntheticSpecFactory())


@pytest.fixture(scope='session')
def blob_hyper():
    return HyperParamsFactory()


@pytest.fixture(scope='session')
def blob_fit(blob_clients, blob_hyper):
    """
    Fitted blob model plus every ClientUpdate seen during the fit, in order.
    """
    from orchestrator.admm import fit

    updates = []
    model = fit(
        [x for x, _ in blob_clients],
        blob_hyper,
        record_wall_time=False,
        on_client_update=lambda update, state: updates.append((update, state)),
    )
    return model, updates


# ============== API Fixtures ==============

@pytest.fixture
def api_client():
    return APIClient()


@pytest.fixture
def experiment_run(db):
    return ExperimentRunFactory()
