"""
Run and synthetic-benchmark configuration.

A run is described by one JSON document (schema_version 1). Relative data and
label paths resolve against the directory holding the config file; a relative
output_dir resolves against settings.FMTC_OUTPUT_ROOT.
"""
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from django.conf import settings

from main.exceptions import ConfigError
from orchestrator.admm import HyperParams

from .serializers import RunConfigSerializer, SyntheticSpecSerializer, flatten_errors

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    clients: int
    clusters: int
    features: int
    samples: int
    separation: float
    mean_shift: float = 0.0
    seed: int = 7

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass
class RunConfig:
    data_paths: list
    output_dir: Path
    hyper: HyperParams = field(default_factory=HyperParams)
    label_paths: Optional[list] = None
    test_fraction: float = 0.2
    parallel: bool = False
    workers: int = 4
    record_wall_time: bool = False
    kmeans_restarts: int = 10
    trace_metrics: bool = False
    baselines: bool = False
    name: str = ''
    schema_version: int = 1

    @property
    def has_labels(self):
        return bool(self.label_paths)

    def as_dict(self):
        """JSON-ready document that parse_run_config accepts back."""
        return {
            'schema_version': self.schema_version,
            'name': self.name,
            'data_paths': [str(path) for path in self.data_paths],
            'label_paths': [str(path) for path in self.label_paths] if self.label_paths else None,
            'output_dir': str(self.output_dir),
            'test_fraction': self.test_fraction,
            'parallel': self.parallel,
            'workers': self.workers,
            'record_wall_time': self.record_wall_time,
            'kmeans_restarts': self.kmeans_restarts,
            'trace_metrics': self.trace_metrics,
            'baselines': self.baselines,
            'hyperparameters': self.hyper.as_dict(),
        }


def _validated(serializer_class, data, source):
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        problems = '; '.join(flatten_errors(serializer.errors))
        raise ConfigError(f"{source}: {problems}" if source else problems)
    return serializer.validated_data


def _resolve(path, base_dir):
    path = Path(path).expanduser()
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return path


def parse_run_config(data, base_dir=None, source=''):
    """Validate a config mapping and build a RunConfig."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object" if source else "Top level must be a JSON object")
    attrs = _validated(RunConfigSerializer, data, source)
    output_dir = Path(attrs['output_dir']).expanduser()
    if not output_dir.is_absolute():
        output_dir = Path(settings.FMTC_OUTPUT_ROOT) / output_dir
    label_paths = attrs.get('label_paths')
    return RunConfig(
        schema_version=attrs['schema_version'],
        name=attrs.get('name', ''),
        data_paths=[_resolve(path, base_dir) for path in attrs['data_paths']],
        label_paths=[_resolve(path, base_dir) for path in label_paths] if label_paths else None,
        output_dir=output_dir,
        test_fraction=attrs['test_fraction'],
        parallel=attrs['parallel'],
        workers=attrs['workers'],
        record_wall_time=attrs['record_wall_time'],
        kmeans_restarts=attrs['kmeans_restarts'],
        trace_metrics=attrs['trace_metrics'],
        baselines=attrs['baselines'],
        hyper=attrs['hyperparameters']['instance'],
    )


def load_run_config(path):
    """Read and validate a JSON run configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}, line {e.lineno}, column {e.colno}: invalid JSON ({e.msg})")
    config = parse_run_config(data, base_dir=path.parent, source=str(path))
    logger.debug(f"Loaded run config from {path}: {len(config.data_paths)} clients")
    return config


def parse_synthetic_spec(data):
    attrs = _validated(SyntheticSpecSerializer, data, '')
    return SyntheticSpec(**attrs)
