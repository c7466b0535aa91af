"""
End-to-end experiment flows behind the management commands: fit a run,
evaluate a saved model, and sweep alpha/beta.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

from django.utils import timezone

from clustering.kmeans import assign_labels, out_of_sample
from main.exceptions import ConfigError, FmtcError
from metrics.scores import evaluate, mean_scores
from orchestrator.admm import fit, kkt_report

from .baselines import baseline_scores
from .datasets import load_client_csv, train_test_split
from .persistence import METRICS_FILE, TRACE_FILE, load_model, write_metrics, write_model, write_trace

logger = logging.getLogger(__name__)


@dataclass
class ClientData:
    x_train: object
    x_test: object
    labels_train: object = None
    labels_test: object = None


@dataclass
class RunResult:
    model: object
    metrics: dict
    output_dir: Path


def load_clients(data_paths, label_paths=None):
    """[(x, labels or None)] for every data path, with client context on errors."""
    clients = []
    for idx, path in enumerate(data_paths):
        label_path = label_paths[idx] if label_paths else None
        try:
            clients.append(load_client_csv(path, label_path))
        except FmtcError as e:
            raise e.with_context(f"client {idx}") from e
    return clients


def split_clients(clients, test_fraction, seed):
    """Per-client held-out split; client t uses seed + t."""
    result = []
    for idx, (x, labels) in enumerate(clients):
        split = train_test_split(len(x), test_fraction, seed + idx)
        x_train, x_test = split.take(x)
        labels_train, labels_test = split.take(labels)
        result.append(ClientData(x_train, x_test, labels_train, labels_test))
    return result


def _scores(pred, truth):
    if truth is None or len(truth) == 0:
        return None
    return evaluate(pred, truth)


def _mean_of(entries, key):
    values = [entry[key] for entry in entries if entry.get(key)]
    return mean_scores(values) or None


def summarize_model(model, data, restarts):
    """
    Per-client scores plus deployment centroids.

    In-sample labels come from k-means on F_t; deployment centroids from
    k-means on X_t W_t of the training part, which also labels held-out rows.
    """
    hyper = model.hyper
    clients = []
    centroids = []
    for idx, (client, part) in enumerate(zip(model.clients, data)):
        seed = hyper.seed + idx
        embedded = assign_labels(client.f, hyper.clusters, restarts=restarts, seed=seed)
        deployed = assign_labels(part.x_train @ client.w, hyper.clusters, restarts=restarts, seed=seed)
        centroids.append(deployed.centroids)
        entry = {
            'client': idx,
            'n_train': int(len(part.x_train)),
            'n_test': int(len(part.x_test)),
            'in_sample': _scores(embedded.labels, part.labels_train),
            'in_sample_projection': _scores(deployed.labels, part.labels_train),
            'out_of_sample': None,
        }
        if len(part.x_test):
            oos_labels = out_of_sample(part.x_test, client.w, deployed.centroids)
            entry['out_of_sample'] = _scores(oos_labels, part.labels_test)
        clients.append(entry)
    summary = {
        'clients': clients,
        'mean': {
            key: _mean_of(clients, key)
            for key in ('in_sample', 'in_sample_projection', 'out_of_sample')
        },
    }
    means = summary['mean']
    if means['in_sample'] and means['out_of_sample']:
        summary['generalization_gap'] = means['in_sample']['acc'] - means['out_of_sample']['acc']
    return summary, centroids


def _mark_failed(run, error):
    if run is None:
        return
    from .models import ExperimentRun
    run.status = ExperimentRun.Status.FAILED
    run.error_message = str(error)
    run.completed_at = timezone.now()
    run.save(update_fields=['status', 'error_message', 'completed_at'])


def execute_run(config, run=None):
    """
    Fit on the training part of every client, then write model/, trace.jsonl
    and metrics.json under config.output_dir. A given ExperimentRun row follows
    PROCESSING -> COMPLETED or FAILED.
    """
    if run is not None:
        from .models import ExperimentRun
        run.status = ExperimentRun.Status.PROCESSING
        run.save(update_fields=['status'])

    try:
        hyper = config.hyper
        clients = load_clients(config.data_paths, config.label_paths)
        data = split_clients(clients, config.test_fraction, hyper.seed)
        labels = [part.labels_train for part in data] if config.has_labels else None
        logger.info(f"Run {config.name or config.output_dir}: fitting {len(data)} clients")

        model = fit(
            [part.x_train for part in data],
            hyper,
            labels=labels,
            parallel=config.parallel,
            workers=config.workers,
            record_wall_time=config.record_wall_time,
            trace_metrics=config.trace_metrics,
            metric_restarts=config.kmeans_restarts,
        )
        summary, centroids = summarize_model(model, data, config.kmeans_restarts)
        last = model.trace.last
        metrics = {
            'converged': model.converged,
            'rounds': len(model.trace),
            'initial_lagrangian': model.trace.initial_lagrangian,
            'initial_objective': model.trace.initial_objective,
            'final': None if last is None else {
                'objective': last.objective,
                'lagrangian': last.lagrangian,
                'primal_residual': last.primal_residual,
                'dual_residual': last.dual_residual,
            },
            'kkt': kkt_report(model),
            **summary,
        }
        if config.baselines and labels is not None:
            metrics['baselines'] = baseline_scores(
                [part.x_train for part in data], labels, hyper, restarts=config.kmeans_restarts,
            )

        output_dir = Path(config.output_dir)
        write_model(output_dir, model, centroids)
        write_trace(output_dir / TRACE_FILE, model.trace)
        write_metrics(output_dir / METRICS_FILE, metrics)
        logger.info(f"Run outputs written to {output_dir} ({len(model.trace)} rounds, converged={model.converged})")
    except Exception as e:
        logger.error(f"Run {config.name or config.output_dir} failed: {e}")
        _mark_failed(run, e)
        raise

    if run is not None:
        run.status = ExperimentRun.Status.COMPLETED
        run.rounds_completed = len(model.trace)
        run.converged = model.converged
        run.final_primal_residual = last.primal_residual if last is not None else None
        run.metrics = metrics
        run.completed_at = timezone.now()
        run.save()
    return RunResult(model=model, metrics=metrics, output_dir=output_dir)


def evaluate_model(model_dir, data_paths, label_paths, test_fraction, seed=None):
    """
    In-sample and out-of-sample scores of a saved model on freshly split data.

    Both parts are labelled through the frozen W_t and centroids; with the
    run's seed and fraction the split reproduces the run's own.
    """
    saved = load_model(model_dir)
    if len(data_paths) != saved.m:
        raise ConfigError(f"Model has {saved.m} clients but {len(data_paths)} data files were given")
    if not label_paths or len(label_paths) != len(data_paths):
        raise ConfigError("One label file per data file is required for evaluation")
    if seed is None:
        seed = saved.manifest['hyperparameters']['seed']
    data = split_clients(load_clients(data_paths, label_paths), test_fraction, seed)

    clients = []
    for idx, part in enumerate(data):
        w, centroids = saved.projections[idx], saved.centroids[idx]
        entry = {
            'client': idx,
            'in_sample': _scores(out_of_sample(part.x_train, w, centroids), part.labels_train),
            'out_of_sample': None,
        }
        if len(part.x_test):
            entry['out_of_sample'] = _scores(out_of_sample(part.x_test, w, centroids), part.labels_test)
        clients.append(entry)
    result = {
        'clients': clients,
        'mean': {key: _mean_of(clients, key) for key in ('in_sample', 'out_of_sample')},
        'test_fraction': test_fraction,
        'seed': seed,
    }
    means = result['mean']
    if means['in_sample'] and means['out_of_sample']:
        result['generalization_gap'] = means['in_sample']['acc'] - means['out_of_sample']['acc']
    return result


def sensitivity_sweep(config, alphas, betas):
    """Mean client scores (k-means on F_t) for every (alpha, beta) pair on the full data."""
    if not config.has_labels:
        raise ConfigError("A sensitivity sweep needs label_paths")
    clients = load_clients(config.data_paths, config.label_paths)
    datasets = [x for x, _ in clients]
    truths = [labels for _, labels in clients]
    results = []
    for alpha in alphas:
        for beta in betas:
            hyper = config.hyper.replace(alpha=alpha, beta=beta)
            model = fit(datasets, hyper, parallel=config.parallel, workers=config.workers, record_wall_time=False)
            scores = [
                evaluate(
                    assign_labels(client.f, hyper.clusters, restarts=config.kmeans_restarts, seed=hyper.seed + idx).labels,
                    truth,
                )
                for idx, (client, truth) in enumerate(zip(model.clients, truths))
            ]
            results.append({
                'alpha': alpha,
                'beta': beta,
                'converged': model.converged,
                'rounds': len(model.trace),
                **mean_scores(scores),
            })
            logger.info(f"Sweep alpha={alpha} beta={beta}: acc={results[-1]['acc']:.4f}")
    return results
