"""
Run outputs: model/W_t.csv, model/centroids_t.csv, model/manifest.json,
trace.jsonl and metrics.json.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from main.exceptions import DataFormatError
from orchestrator.trace import TRACE_FIELDS

logger = logging.getLogger(__name__)

MODEL_DIR = 'model'
TRACE_FILE = 'trace.jsonl'
METRICS_FILE = 'metrics.json'
MANIFEST_FILE = 'manifest.json'


@dataclass
class SavedModel:
    projections: list
    centroids: list
    manifest: dict

    @property
    def m(self):
        return len(self.projections)


def _write_matrix(path, matrix):
    np.savetxt(path, np.atleast_2d(matrix), delimiter=',', fmt='%.17g')


def _read_matrix(path):
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=',', dtype=float, ndmin=2))
    except FileNotFoundError:
        raise DataFormatError("file not found", path=path)
    except ValueError as e:
        raise DataFormatError(f"not a numeric matrix ({e})", path=path)


def write_model(output_dir, model, centroids):
    """Deployable part of a fitted model: one W_t and one centroid set per client."""
    model_dir = Path(output_dir) / MODEL_DIR
    model_dir.mkdir(parents=True, exist_ok=True)
    for idx, client in enumerate(model.clients):
        _write_matrix(model_dir / f"W_{idx}.csv", client.w)
        _write_matrix(model_dir / f"centroids_{idx}.csv", centroids[idx])
    manifest = {
        'clients': model.m,
        'features': int(model.server.shape[0]),
        'clusters': model.hyper.clusters,
        'converged': model.converged,
        'rounds': len(model.trace),
        'hyperparameters': model.hyper.as_dict(),
    }
    (model_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + '\n')
    logger.info(f"Wrote model for {model.m} clients to {model_dir}")
    return model_dir


def load_model(output_dir):
    model_dir = Path(output_dir) / MODEL_DIR
    manifest_path = model_dir / MANIFEST_FILE
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise DataFormatError("model manifest not found", path=manifest_path)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"invalid JSON ({e.msg})", path=manifest_path, line=e.lineno)
    projections = []
    centroids = []
    for idx in range(manifest['clients']):
        projections.append(_read_matrix(model_dir / f"W_{idx}.csv"))
        centroids.append(_read_matrix(model_dir / f"centroids_{idx}.csv"))
    return SavedModel(projections=projections, centroids=centroids, manifest=manifest)


def write_trace(path, trace):
    """One JSON object per round, fields in trace order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w') as handle:
        for record in trace:
            handle.write(json.dumps(record.as_dict(), allow_nan=False) + '\n')
    return path


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def read_trace(path):
    """
    Strict JSON-lines reader: every line one object with exactly the trace
    fields, rounds strictly increasing.
    """
    path = Path(path)
    records = []
    previous = None
    try:
        handle = path.open()
    except FileNotFoundError:
        raise DataFormatError("file not found", path=path)
    with handle:
        for line_no, line in enumerate(handle, start=1):
            try:
                record = json.loads(line, parse_constant=_reject_constant)
            except ValueError as e:
                raise DataFormatError(f"invalid JSON ({e})", path=path, line=line_no)
            if not isinstance(record, dict) or tuple(record) != TRACE_FIELDS:
                raise DataFormatError("record does not carry exactly the trace fields", path=path, line=line_no)
            if previous is not None and record['round'] <= previous:
                raise DataFormatError(f"round {record['round']} follows round {previous}", path=path, line=line_no)
            previous = record['round']
            records.append(record)
    return records


def write_metrics(path, metrics):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(metrics, indent=2, sort_keys=True, allow_nan=False) + '\n')
    return path
