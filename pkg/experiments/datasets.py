"""
Client data files and the synthetic Gaussian-blob benchmark.

Data: numeric CSV per client, rows = samples, optional header line (detected
by a non-numeric first row). Labels: one integer per line.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from main.exceptions import DataFormatError, DimensionMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _open(path):
    path = Path(path)
    try:
        return path.open(newline='')
    except FileNotFoundError:
        raise DataFormatError("file not found", path=path)
    except OSError as e:
        raise DataFormatError(f"cannot read file ({e.strerror})", path=path)


def load_client_csv(path, label_path=None):
    """
    Read one client's sample matrix and, optionally, its labels.

    Returns:
        (x, labels) where labels is None without label_path.

    Raises:
        DataFormatError: missing file, ragged row, non-numeric cell, no rows,
            or a label count that differs from the sample count.
    """
    path = Path(path)
    rows = []
    width = None
    with _open(path) as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            cells = [cell.strip() for cell in row]
            if not cells or all(cell == '' for cell in cells):
                continue
            if width is None and not rows and not all(_is_number(cell) for cell in cells):
                logger.debug(f"{path}: treating line {line_no} as a header")
                width = len(cells)
                continue
            if width is None:
                width = len(cells)
            if len(cells) != width:
                raise DataFormatError(f"expected {width} columns, found {len(cells)}", path=path, line=line_no)
            values = []
            for col_no, cell in enumerate(cells, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataFormatError(f"non-numeric value {cell!r}", path=path, line=line_no, column=col_no)
            rows.append(values)
    if not rows:
        raise DataFormatError("no data rows", path=path)

    x = np.asarray(rows, dtype=float)
    labels = None
    if label_path is not None:
        labels = load_labels(label_path)
        if labels.size != x.shape[0]:
            raise DataFormatError(
                f"{labels.size} labels for {x.shape[0]} samples in {path}", path=label_path
            )
    logger.info(f"Loaded {x.shape[0]}x{x.shape[1]} client data from {path}")
    return x, labels


def load_labels(path):
    """One non-negative integer label per line; blank lines are skipped."""
    path = Path(path)
    labels = []
    with _open(path) as handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = int(text)
            except ValueError:
                raise DataFormatError(f"label {text!r} is not an integer", path=path, line=line_no)
            if value < 0:
                raise DataFormatError(f"label {value} is negative", path=path, line=line_no)
            labels.append(value)
    if not labels:
        raise DataFormatError("no labels", path=path)
    return np.asarray(labels, dtype=np.int64)


def labels_path_for(path):
    path = Path(path)
    return path.with_name(f"{path.stem}.labels.txt")


def write_client_csv(path, x, labels=None, label_path=None):
    """Write samples (and labels next to them) in the format load_client_csv reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.asarray(x, dtype=float)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        for row in x:
            writer.writerow([repr(float(value)) for value in row])
    written_labels = None
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (x.shape[0],):
            raise DimensionMismatchError(f"{labels.shape} labels for {x.shape[0]} samples")
        written_labels = Path(label_path) if label_path is not None else labels_path_for(path)
        with written_labels.open('w') as handle:
            handle.writelines(f"{int(value)}\n" for value in labels)
    return path, written_labels


def blob_means(clusters, features, separation, rng):
    """
    Cluster means at pairwise distance >= separation.

    With clusters <= features the means sit on scaled orthonormal directions
    (pairwise distance exactly separation); otherwise random points are
    rescaled until the closest pair is separation apart.
    """
    if clusters <= features:
        q, _ = np.linalg.qr(rng.standard_normal((features, clusters)))
        return (separation / np.sqrt(2.0)) * q.T
    means = rng.standard_normal((clusters, features))
    gaps = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=2)
    closest = gaps[np.triu_indices(clusters, k=1)].min()
    return means * (separation / closest)


def generate_synthetic(spec):
    """
    Per client: `clusters` isotropic unit-variance blobs around shared means,
    moved by a client-specific shift of norm spec.mean_shift.

    Returns:
        list of (x, labels), one per client; identical for identical specs.
    """
    if spec.clusters > spec.samples:
        raise InvalidParameterError(f"clusters={spec.clusters} exceeds samples={spec.samples}")
    if not spec.separation > 0:
        raise InvalidParameterError(f"separation must be positive, got {spec.separation!r}")
    rng = np.random.default_rng(spec.seed)
    means = blob_means(spec.clusters, spec.features, spec.separation, rng)
    clients = []
    for _ in range(spec.clients):
        direction = rng.standard_normal(spec.features)
        shift = spec.mean_shift * direction / np.linalg.norm(direction)
        labels = rng.permutation(np.arange(spec.samples) % spec.clusters)
        x = means[labels] + shift + rng.standard_normal((spec.samples, spec.features))
        clients.append((x, labels.astype(np.int64)))
    logger.debug(
        f"Generated {spec.clients} synthetic clients ({spec.samples}x{spec.features}, "
        f"c={spec.clusters}, separation={spec.separation}, shift={spec.mean_shift})"
    )
    return clients


@dataclass
class Split:
    train_index: np.ndarray
    test_index: np.ndarray

    def take(self, values):
        if values is None:
            return None, None
        values = np.asarray(values)
        return values[self.train_index], values[self.test_index]


def train_test_split(n_samples, fraction, seed):
    """
    Seeded random split holding out round(fraction * n) samples, at most n - 2
    so the training part can still form a graph. Indices are sorted.
    """
    if not 0 <= fraction <= 0.5:
        raise InvalidParameterError(f"test fraction must lie in [0, 0.5], got {fraction!r}")
    n_test = min(int(round(fraction * n_samples)), max(n_samples - 2, 0))
    order = np.random.default_rng(seed).permutation(n_samples)
    return Split(train_index=np.sort(order[n_test:]), test_index=np.sort(order[:n_test]))
