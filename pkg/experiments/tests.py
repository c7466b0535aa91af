"""
Tests for the experiments app.
Tests for: run configs, client files, the synthetic benchmark, persistence,
the run pipeline, the CLI, background runs and the run registry API.
"""
import json

import numpy as np
import pytest
from django.contrib import admin
from django.core.management import call_command
from rest_framework import status

from clustering.kmeans import assign_labels
from conftest import ExperimentRunFactory, HyperParamsFactory, SyntheticSpecFactory
from experiments.baselines import baseline_scores, union_spectral
from experiments.cli import cli_main
from experiments.config import load_run_config, parse_run_config, parse_synthetic_spec
from experiments.datasets import (
    generate_synthetic,
    labels_path_for,
    load_client_csv,
    load_labels,
    train_test_split,
    write_client_csv,
)
from experiments.models import ExperimentRun
from experiments.persistence import (
    METRICS_FILE,
    MODEL_DIR,
    TRACE_FILE,
    load_model,
    read_trace,
    write_model,
    write_trace,
)
from experiments.pipeline import evaluate_model, execute_run, sensitivity_sweep
from experiments.tasks import process_experiment_run
from main.exceptions import ConfigError, DataFormatError, InvalidParameterError
from metrics.scores import accuracy
from orchestrator.admm import fit
from orchestrator.trace import TRACE_FIELDS, ConvergenceTrace, RoundRecord


def write_blob_files(directory, spec=None):
    """Client CSVs and label files for the blob benchmark; returns (data, labels) name lists."""
    data_paths, label_paths = [], []
    for idx, (x, labels) in enumerate(generate_synthetic(spec or SyntheticSpecFactory())):
        data_path, label_path = write_client_csv(directory / f'client_{idx}.csv', x, labels)
        data_paths.append(data_path.name)
        label_paths.append(label_path.name)
    return data_paths, label_paths


def write_config(directory, hyperparameters=None, **overrides):
    data_paths, label_paths = write_blob_files(directory)
    document = {
        'schema_version': 1,
        'name': 'blobs',
        'data_paths': data_paths,
        'label_paths': label_paths,
        'output_dir': str(directory / 'run'),
        'hyperparameters': hyperparameters if hyperparameters is not None else {'max_rounds': 50},
    }
    document.update(overrides)
    path = directory / 'config.json'
    path.write_text(json.dumps(document))
    return path


def minimal_config(**overrides):
    document = {'schema_version': 1, 'data_paths': ['a.csv'], 'output_dir': '/tmp/fmtc-out'}
    document.update(overrides)
    return document


def trace_of(rounds):
    trace = ConvergenceTrace(initial_lagrangian=1.0)
    for idx in range(rounds):
        trace.append(RoundRecord(
            round=idx, objective=1.0 / (idx + 1), lagrangian=1.0 / (idx + 2),
            lagrangian_primal=1.0 / (idx + 1.5), primal_residual=0.1 ** idx, dual_residual=0.0,
        ))
    return trace


# ============== Run Config Tests ==============

class TestRunConfig:
    """Test parse_run_config and load_run_config"""

    def test_defaults(self, settings):
        """Test defaults come from settings and HyperParams"""
        config = parse_run_config(minimal_config())
        assert config.test_fraction == settings.FMTC_TEST_FRACTION
        assert config.hyper.seed == settings.FMTC_DEFAULT_SEED
        assert config.hyper.max_rounds == 200
        assert not config.has_labels

    def test_hyperparameters_override(self):
        """Test hyperparameters in the config override defaults"""
        config = parse_run_config(minimal_config(hyperparameters={'beta': 0.5, 'sigma': 'auto', 'p': 0.5}))
        assert config.hyper.beta == 0.5
        assert config.hyper.p == 0.5
        assert config.hyper.sigma == 'auto'

    def test_relative_paths(self, tmp_path, settings):
        """Test data paths resolve against the config and outputs against the output root"""
        settings.FMTC_OUTPUT_ROOT = tmp_path / 'outputs'
        config = parse_run_config(minimal_config(output_dir='exp'), base_dir=tmp_path)
        assert config.data_paths == [tmp_path / 'a.csv']
        assert config.output_dir == tmp_path / 'outputs' / 'exp'

    def test_unknown_key(self):
        """Test an unknown top-level key is named in the error"""
        with pytest.raises(ConfigError, match='learning_rate'):
            parse_run_config(minimal_config(learning_rate=0.1))

    def test_unknown_hyperparameter(self):
        """Test an unknown hyperparameter is named in the error"""
        with pytest.raises(ConfigError, match='hyperparameters.gamma'):
            parse_run_config(minimal_config(hyperparameters={'gamma': 1.0}))

    @pytest.mark.parametrize('hyperparameters, field', [
        ({'p': 1.5}, 'hyperparameters.p'),
        ({'rho': 0}, 'hyperparameters.rho'),
        ({'clusters': 1}, 'hyperparameters.clusters'),
        ({'sigma': -1}, 'hyperparameters.sigma'),
    ])
    def test_invalid_hyperparameters(self, hyperparameters, field):
        """Test invalid hyperparameter values are named in the error"""
        with pytest.raises(ConfigError, match=field):
            parse_run_config(minimal_config(hyperparameters=hyperparameters))

    def test_schema_version(self):
        """Test an unsupported schema_version is rejected"""
        with pytest.raises(ConfigError, match='schema_version'):
            parse_run_config(minimal_config(schema_version=2))

    def test_label_paths_length(self):
        """Test label_paths must match data_paths in length"""
        with pytest.raises(ConfigError, match='label_paths'):
            parse_run_config(minimal_config(data_paths=['a.csv', 'b.csv'], label_paths=['a.txt']))

    def test_test_fraction_range(self):
        """Test test_fraction above 0.5 is rejected"""
        with pytest.raises(ConfigError, match='test_fraction'):
            parse_run_config(minimal_config(test_fraction=0.7))

    def test_top_level_must_be_object(self):
        """Test a JSON array config is rejected"""
        with pytest.raises(ConfigError):
            parse_run_config(['a.csv'])

    def test_as_dict_parses_back(self):
        """Test as_dict output parses to the same config"""
        config = parse_run_config(minimal_config(hyperparameters={'beta': 0.3}, label_paths=['a.txt']))
        again = parse_run_config(config.as_dict())
        assert again.hyper == config.hyper
        assert again.label_paths == config.label_paths

    def test_invalid_json_names_line(self, tmp_path):
        """Test malformed JSON reports the line"""
        path = tmp_path / 'config.json'
        path.write_text('{\n  "schema_version": 1,\n  oops\n}')
        with pytest.raises(ConfigError, match='line 3'):
            load_run_config(path)

    def test_missing_file(self, tmp_path):
        """Test a missing config file is reported"""
        with pytest.raises(ConfigError, match='not found'):
            load_run_config(tmp_path / 'absent.json')

    def test_synthetic_spec(self):
        """Test synthetic specs parse and validate the cluster count"""
        spec = parse_synthetic_spec({'clients': 2, 'clusters': 3, 'features': 4, 'samples': 10, 'separation': 5})
        assert spec.clients == 2
        with pytest.raises(ConfigError, match='clusters'):
            parse_synthetic_spec({'clients': 2, 'clusters': 30, 'features': 4, 'samples': 10, 'separation': 5})


# ============== Client File Tests ==============

class TestClientFiles:
    """Test load_client_csv and load_labels"""

    def test_plain_matrix(self, tmp_path):
        """Test a headerless numeric CSV loads as a matrix"""
        path = tmp_path / 'c.csv'
        path.write_text('1,2\n3,4\n')
        x, labels = load_client_csv(path)
        np.testing.assert_array_equal(x, [[1.0, 2.0], [3.0, 4.0]])
        assert labels is None

    def test_header_skipped(self, tmp_path):
        """Test a non-numeric first row is treated as a header"""
        path = tmp_path / 'c.csv'
        path.write_text('f1,f2\n1,2\n')
        x, _ = load_client_csv(path)
        np.testing.assert_array_equal(x, [[1.0, 2.0]])

    def test_ragged_row_names_line(self, tmp_path):
        """Test a short row reports its line"""
        path = tmp_path / 'c.csv'
        path.write_text('1,2\n3\n')
        with pytest.raises(DataFormatError, match='line 2'):
            load_client_csv(path)

    def test_non_numeric_names_line_and_column(self, tmp_path):
        """Test a bad cell reports its line and column"""
        path = tmp_path / 'c.csv'
        path.write_text('1,2\n3,x\n')
        with pytest.raises(DataFormatError, match='line 2, column 2'):
            load_client_csv(path)

    def test_missing_file_names_path(self, tmp_path):
        """Test a missing data file names the path"""
        with pytest.raises(DataFormatError, match='absent.csv'):
            load_client_csv(tmp_path / 'absent.csv')

    def test_empty_file(self, tmp_path):
        """Test an empty data file is rejected"""
        path = tmp_path / 'c.csv'
        path.write_text('\n')
        with pytest.raises(DataFormatError, match='no data rows'):
            load_client_csv(path)

    def test_label_count_mismatch(self, tmp_path):
        """Test label and sample counts must agree"""
        path = tmp_path / 'c.csv'
        path.write_text('1,2\n3,4\n')
        (tmp_path / 'c.labels.txt').write_text('0\n1\n1\n')
        with pytest.raises(DataFormatError, match='3 labels for 2 samples'):
            load_client_csv(path, labels_path_for(path))

    def test_negative_label(self, tmp_path):
        """Test negative labels are rejected"""
        path = tmp_path / 'l.txt'
        path.write_text('0\n-1\n')
        with pytest.raises(DataFormatError, match='line 2'):
            load_labels(path)

    def test_written_files_read_back(self, tmp_path, rng):
        """Test written client files load back unchanged"""
        x = rng.standard_normal((6, 3))
        labels = np.array([0, 1, 2, 0, 1, 2])
        data_path, label_path = write_client_csv(tmp_path / 'c.csv', x, labels)
        assert label_path == tmp_path / 'c.labels.txt'
        loaded, loaded_labels = load_client_csv(data_path, label_path)
        np.testing.assert_array_equal(loaded, x)
        np.testing.assert_array_equal(loaded_labels, labels)


# ============== Synthetic Benchmark Tests ==============

class TestSyntheticBlobs:
    """Test generate_synthetic"""

    def test_deterministic(self):
        """Test the same spec gives the same data"""
        first = generate_synthetic(SyntheticSpecFactory())
        second = generate_synthetic(SyntheticSpecFactory())
        for (x1, y1), (x2, y2) in zip(first, second):
            np.testing.assert_array_equal(x1, x2)
            np.testing.assert_array_equal(y1, y2)

    def test_shapes_and_balance(self):
        """Test client shapes and near-equal cluster sizes"""
        clients = generate_synthetic(SyntheticSpecFactory(clients=4, samples=61))
        assert len(clients) == 4
        for x, labels in clients:
            assert x.shape == (61, 5)
            assert sorted(np.bincount(labels).tolist()) == [20, 20, 21]

    def test_wide_separation_is_trivially_clusterable(self):
        """Test very separated blobs cluster perfectly"""
        for x, labels in generate_synthetic(SyntheticSpecFactory(separation=100.0)):
            assert accuracy(assign_labels(x, 3, seed=0).labels, labels) == 1.0

    def test_no_shift_means_same_mixture(self):
        """Test clients without shift share their blob means"""
        (x0, _), (x1, _) = generate_synthetic(SyntheticSpecFactory(clients=2, mean_shift=0.0))
        stderr = np.sqrt(x0.var(axis=0, ddof=1) / len(x0) + x1.var(axis=0, ddof=1) / len(x1))
        assert np.all(np.abs(x0.mean(axis=0) - x1.mean(axis=0)) < 3 * stderr)

    def test_mean_shift_is_a_rigid_client_offset(self):
        """Test the shift moves every row of a client by the same vector"""
        shared = generate_synthetic(SyntheticSpecFactory(mean_shift=0.0))
        shifted = generate_synthetic(SyntheticSpecFactory(mean_shift=10.0))
        for (x0, y0), (x1, y1) in zip(shared, shifted):
            np.testing.assert_array_equal(y0, y1)
            offset = x1 - x0
            np.testing.assert_allclose(offset, np.broadcast_to(offset[0], offset.shape), atol=1e-12)
            assert np.linalg.norm(offset[0]) == pytest.approx(10.0)

    def test_more_clusters_than_features(self):
        """Test c > d still generates data"""
        clients = generate_synthetic(SyntheticSpecFactory(clusters=4, features=2, samples=40))
        assert clients[0][0].shape == (40, 2)

    def test_too_many_clusters(self):
        """Test more clusters than samples is rejected"""
        with pytest.raises(InvalidParameterError):
            generate_synthetic(SyntheticSpecFactory(clusters=10, samples=5))


# ============== Split Tests ==============

class TestTrainTestSplit:
    """Test train_test_split"""

    def test_partition(self):
        """Test train and held-out rows partition the client"""
        split = train_test_split(50, 0.2, seed=3)
        assert len(split.test_index) == 10
        combined = np.sort(np.concatenate([split.train_index, split.test_index]))
        np.testing.assert_array_equal(combined, np.arange(50))

    def test_deterministic(self):
        """Test the split is fixed by the seed"""
        np.testing.assert_array_equal(train_test_split(30, 0.3, 1).test_index, train_test_split(30, 0.3, 1).test_index)

    def test_keeps_two_training_rows(self):
        """Test at least two rows stay in training"""
        split = train_test_split(3, 0.5, seed=0)
        assert len(split.train_index) >= 2

    def test_zero_fraction(self):
        """Test fraction 0 keeps every row for training"""
        split = train_test_split(10, 0.0, seed=0)
        assert len(split.test_index) == 0
        assert split.take(None) == (None, None)

    def test_invalid_fraction(self):
        """Test a fraction outside [0, 0.5] is rejected"""
        with pytest.raises(InvalidParameterError):
            train_test_split(10, 0.6, seed=0)


# ============== Persistence Tests ==============

class TestPersistence:
    """Test trace and model files"""

    def test_trace_fields_in_order(self, tmp_path):
        """Test trace lines keep the column order"""
        path = write_trace(tmp_path / TRACE_FILE, trace_of(3))
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        assert tuple(json.loads(lines[0])) == TRACE_FIELDS
        assert [record['round'] for record in read_trace(path)] == [0, 1, 2]

    def test_empty_trace(self, tmp_path):
        """Test an empty trace writes an empty file"""
        path = write_trace(tmp_path / TRACE_FILE, ConvergenceTrace())
        assert path.read_text() == ''
        assert read_trace(path) == []

    def test_extra_field_rejected(self, tmp_path):
        """Test a trace line with an unknown field is rejected"""
        record = trace_of(1)[0].as_dict()
        record['extra'] = 1
        path = tmp_path / TRACE_FILE
        path.write_text(json.dumps(record) + '\n')
        with pytest.raises(DataFormatError, match='line 1'):
            read_trace(path)

    def test_non_finite_rejected(self, tmp_path):
        """Test NaN in a trace line is rejected"""
        path = tmp_path / TRACE_FILE
        path.write_text(json.dumps(trace_of(1)[0].as_dict()).replace('"dual_residual": 0.0', '"dual_residual": NaN') + '\n')
        with pytest.raises(DataFormatError):
            read_trace(path)

    def test_rounds_must_increase(self, tmp_path):
        """Test a repeated round reports its line"""
        record = json.dumps(trace_of(1)[0].as_dict())
        path = tmp_path / TRACE_FILE
        path.write_text(record + '\n' + record + '\n')
        with pytest.raises(DataFormatError, match='line 2'):
            read_trace(path)

    def test_model_files(self, tmp_path, blob_clients):
        """Test saved model files load back"""
        model = fit([x for x, _ in blob_clients], HyperParamsFactory(max_rounds=2), record_wall_time=False)
        centroids = [np.eye(3) * (idx + 1) for idx in range(model.m)]
        write_model(tmp_path, model, centroids)
        saved = load_model(tmp_path)
        assert saved.m == 3
        assert saved.manifest['rounds'] == 2
        for client, w, c, expected in zip(model.clients, saved.projections, saved.centroids, centroids):
            np.testing.assert_array_equal(w, client.w)
            np.testing.assert_array_equal(c, expected)

    def test_missing_manifest(self, tmp_path):
        """Test a model directory without a manifest is rejected"""
        with pytest.raises(DataFormatError, match='manifest'):
            load_model(tmp_path)


# ============== Baseline Tests ==============

class TestBaselines:
    """Test the single-client and pooled spectral baselines"""

    def test_scores_on_blobs(self, blob_clients):
        """Test the per-client baseline separates the blobs"""
        scores = baseline_scores([x for x, _ in blob_clients], [y for _, y in blob_clients], HyperParamsFactory())
        assert set(scores) == {'stsc', 'usc'}
        assert scores['stsc']['acc'] >= 0.95

    def test_union_splits_back_per_client(self, blob_clients):
        """Test pooled labels are split back per client"""
        pooled = union_spectral([x for x, _ in blob_clients], 3, seed=0)
        assert [len(labels) for labels in pooled] == [60, 60, 60]


# ============== Pipeline Tests ==============

@pytest.mark.django_db
class TestExecuteRun:
    """Test execute_run and evaluate_model"""

    def test_outputs_and_generalization(self, tmp_path):
        """Test a full run writes its outputs, converges and generalises"""
        config = load_run_config(write_config(tmp_path, hyperparameters={'beta': 0.01}))
        result = execute_run(config)
        output_dir = tmp_path / 'run'
        assert (output_dir / TRACE_FILE).exists()
        assert (output_dir / MODEL_DIR / 'W_0.csv').exists()
        metrics = json.loads((output_dir / METRICS_FILE).read_text())
        assert metrics['converged'] is True
        assert metrics['rounds'] == len(result.model.trace)
        assert len(metrics['clients']) == 3
        assert abs(metrics['generalization_gap']) <= 0.05
        assert metrics['kkt']['primal_residual'] <= 1e-6

    def test_registered_run_completes(self, tmp_path):
        """Test a registered run is marked completed"""
        config = load_run_config(write_config(tmp_path, hyperparameters={'max_rounds': 3}))
        run = ExperimentRunFactory(output_dir=str(config.output_dir), config=config.as_dict())
        execute_run(config, run=run)
        run.refresh_from_db()
        assert run.status == ExperimentRun.Status.COMPLETED
        assert run.rounds_completed == 3
        assert run.metrics['rounds'] == 3
        assert run.completed_at is not None

    def test_failed_run_records_error(self, tmp_path):
        """Test a failing run stores its error message"""
        config = parse_run_config(minimal_config(output_dir=str(tmp_path / 'out')), base_dir=tmp_path)
        run = ExperimentRunFactory()
        with pytest.raises(DataFormatError, match='client 0'):
            execute_run(config, run=run)
        run.refresh_from_db()
        assert run.status == ExperimentRun.Status.FAILED
        assert 'a.csv' in run.error_message

    def test_baselines_reported(self, tmp_path):
        """Test baseline scores appear in the metrics"""
        config = load_run_config(write_config(tmp_path, hyperparameters={'max_rounds': 2}, baselines=True))
        result = execute_run(config)
        assert set(result.metrics['baselines']) == {'stsc', 'usc'}

    def test_evaluate_saved_model(self, tmp_path):
        """Test evaluating a saved model on its data"""
        config = load_run_config(write_config(tmp_path))
        execute_run(config)
        result = evaluate_model(config.output_dir, config.data_paths, config.label_paths, config.test_fraction)
        assert result['seed'] == config.hyper.seed
        assert result['mean']['in_sample']['acc'] >= 0.95
        assert result['mean']['out_of_sample']['acc'] >= 0.9

    def test_evaluate_needs_labels(self, tmp_path):
        """Test evaluation without labels is rejected"""
        config = load_run_config(write_config(tmp_path, hyperparameters={'max_rounds': 1}))
        execute_run(config)
        with pytest.raises(ConfigError):
            evaluate_model(config.output_dir, config.data_paths, None, 0.2)

    def test_sensitivity_grid(self, tmp_path):
        """Test the sweep covers the alpha by beta grid in order"""
        config = load_run_config(write_config(tmp_path, hyperparameters={'max_rounds': 5}))
        results = sensitivity_sweep(config, [0.1, 1.0], [0.0, 0.1])
        assert [(row['alpha'], row['beta']) for row in results] == [(0.1, 0.0), (0.1, 0.1), (1.0, 0.0), (1.0, 0.1)]
        assert all(0.0 <= row['acc'] <= 1.0 for row in results)


# ============== CLI Tests ==============

@pytest.mark.django_db(transaction=True)
class TestCli:
    """Test cli_main end to end"""

    def test_gen_run_eval(self, tmp_path):
        """Test gen, run and eval end to end"""
        data_dir = tmp_path / 'data'
        assert cli_main(['gen', '--output-dir', str(data_dir)]) == 0
        assert (data_dir / 'client_2.labels.txt').exists()
        config_path = data_dir / 'config.json'

        assert cli_main(['run', str(config_path)]) == 0
        run_dir = data_dir / 'run'
        records = read_trace(run_dir / TRACE_FILE)
        metrics = json.loads((run_dir / METRICS_FILE).read_text())
        previous = metrics['initial_lagrangian']
        for record in records:
            assert record['lagrangian_primal'] <= previous + 1e-9 * max(1.0, abs(previous))
            previous = record['lagrangian']
        assert ExperimentRun.objects.get().status == ExperimentRun.Status.COMPLETED

        assert cli_main(['eval', '--config', str(config_path)]) == 0
        evaluation = json.loads((run_dir / 'evaluation.json').read_text())
        assert len(evaluation['clients']) == 3

    def test_zero_rounds(self, tmp_path):
        """Test a zero-round run succeeds with an empty trace"""
        config_path = write_config(tmp_path, hyperparameters={'max_rounds': 0})
        assert cli_main(['run', str(config_path)]) == 0
        run_dir = tmp_path / 'run'
        assert read_trace(run_dir / TRACE_FILE) == []
        metrics = json.loads((run_dir / METRICS_FILE).read_text())
        assert metrics['rounds'] == 0
        assert metrics['final'] is None
        assert load_model(run_dir).m == 3

    def test_traces_byte_identical(self, tmp_path):
        """Test two seeded runs write identical traces"""
        (tmp_path / 'a').mkdir()
        (tmp_path / 'b').mkdir()
        first = write_config(tmp_path / 'a', output_dir=str(tmp_path / 'out_a'))
        second = write_config(tmp_path / 'b', output_dir=str(tmp_path / 'out_b'))
        assert cli_main(['run', str(first)]) == 0
        assert cli_main(['run', str(second)]) == 0
        assert (tmp_path / 'out_a' / TRACE_FILE).read_bytes() == (tmp_path / 'out_b' / TRACE_FILE).read_bytes()

    def test_missing_data_file(self, tmp_path, capsys):
        """Test a missing data file exits 1 with one error line"""
        config_path = tmp_path / 'config.json'
        config_path.write_text(json.dumps(minimal_config(data_paths=['missing.csv'], output_dir=str(tmp_path / 'out'))))
        assert cli_main(['run', str(config_path)]) == 1
        diagnostics = [line for line in capsys.readouterr().err.splitlines() if line.startswith('fmtc run:')]
        assert len(diagnostics) == 1
        assert 'missing.csv' in diagnostics[0]
        assert ExperimentRun.objects.get().status == ExperimentRun.Status.FAILED

    def test_invalid_config(self, tmp_path, capsys):
        """Test an invalid config exits 1 naming the field"""
        config_path = tmp_path / 'config.json'
        config_path.write_text(json.dumps(minimal_config(hyperparameters={'p': 3})))
        assert cli_main(['run', str(config_path)]) == 1
        assert 'hyperparameters.p' in capsys.readouterr().err

    def test_unknown_flag(self, tmp_path):
        """Test an unknown flag exits 2"""
        config_path = write_config(tmp_path)
        assert cli_main(['run', str(config_path), '--bogus']) == 2

    def test_unknown_command(self):
        """Test an unknown command exits 2"""
        assert cli_main(['train']) == 2

    def test_no_arguments(self):
        """Test no arguments exits 2 and --help exits 0"""
        assert cli_main([]) == 2
        assert cli_main(['--help']) == 0


# ============== Background Run Tests ==============

@pytest.mark.django_db
class TestBackgroundRuns:
    """Test process_experiment_run"""

    def test_task_completes_run(self, tmp_path):
        """Test the task runs a pending run to completion"""
        config = load_run_config(write_config(tmp_path, hyperparameters={'max_rounds': 2}))
        run = ExperimentRunFactory(config=config.as_dict(), output_dir=str(config.output_dir))
        process_experiment_run(run.id)
        run.refresh_from_db()
        assert run.status == ExperimentRun.Status.COMPLETED
        assert (tmp_path / 'run' / TRACE_FILE).exists()

    def test_task_marks_bad_config_failed(self):
        """Test a bad stored config marks the run failed"""
        run = ExperimentRunFactory(config={'schema_version': 9})
        process_experiment_run(run.id)
        run.refresh_from_db()
        assert run.status == ExperimentRun.Status.FAILED
        assert 'schema_version' in run.error_message

    def test_missing_run(self):
        """Test an unknown run id returns None"""
        assert process_experiment_run(987654) is None

    def test_background_command(self, tmp_path):
        """Test run --background queues and completes a run"""
        config_path = write_config(tmp_path, hyperparameters={'max_rounds': 2})
        call_command('run', str(config_path), '--background', '--name', 'queued')
        run = ExperimentRun.objects.get(name='queued')
        assert run.status == ExperimentRun.Status.COMPLETED


# ============== Model Tests ==============

@pytest.mark.django_db
class TestExperimentRunModel:
    """Test ExperimentRun"""

    def test_defaults(self, experiment_run):
        """Test a new run is pending and unconverged"""
        assert experiment_run.status == ExperimentRun.Status.PENDING
        assert experiment_run.rounds_completed == 0
        assert not experiment_run.converged

    def test_str(self, experiment_run):
        """Test run string representation"""
        assert experiment_run.name in str(experiment_run)
        assert 'PENDING' in str(experiment_run)

    def test_trace_path(self, experiment_run):
        """Test the trace path sits in the output directory"""
        assert str(experiment_run.trace_path).endswith('trace.jsonl')

    def test_admin_registered(self):
        """Test ExperimentRun is registered with the admin"""
        assert admin.site.is_registered(ExperimentRun)


# ============== API Tests ==============

@pytest.mark.django_db
class TestExperimentRunAPI:
    """Test the run registry endpoints"""

    def test_health(self, api_client):
        """Test the health check"""
        response = api_client.get('/api/health/')
        assert response.status_code == status.HTTP_200_OK
        assert response.json()['service'] == 'fmtc'

    def test_list_runs(self, api_client, experiment_run):
        """Test listing runs"""
        response = api_client.get('/api/experiments/runs/')
        assert response.status_code == status.HTTP_200_OK
        runs = response.data.get('results', [])
        assert [run['id'] for run in runs] == [experiment_run.id]
        assert runs[0]['status_display'] == 'Pending'

    def test_status_filter(self, api_client, experiment_run):
        """Test filtering runs by status"""
        ExperimentRunFactory(status=ExperimentRun.Status.COMPLETED)
        response = api_client.get('/api/experiments/runs/?status=completed')
        assert response.status_code == status.HTTP_200_OK
        assert [run['status'] for run in response.data['results']] == ['COMPLETED']

    def test_detail(self, api_client, experiment_run):
        """Test run detail"""
        response = api_client.get(f'/api/experiments/runs/{experiment_run.id}/')
        assert response.status_code == status.HTTP_200_OK
        assert response.data['name'] == experiment_run.name

    def test_detail_not_found(self, api_client):
        """Test detail of an unknown run is 404"""
        response = api_client.get('/api/experiments/runs/987654/')
        assert response.status_code == status.HTTP_404_NOT_FOUND

    def test_trace_of_pending_run(self, api_client, experiment_run):
        """Test the trace of a pending run is 409"""
        response = api_client.get(f'/api/experiments/runs/{experiment_run.id}/trace/')
        assert response.status_code == status.HTTP_409_CONFLICT

    def test_trace_of_completed_run(self, api_client, tmp_path):
        """Test the trace of a completed run"""
        write_trace(tmp_path / TRACE_FILE, trace_of(4))
        run = ExperimentRunFactory(status=ExperimentRun.Status.COMPLETED, output_dir=str(tmp_path))
        response = api_client.get(f'/api/experiments/runs/{run.id}/trace/')
        assert response.status_code == status.HTTP_200_OK
        assert response.data['count'] == 4
        assert response.data['records'][3]['round'] == 3

    def test_trace_file_missing(self, api_client, tmp_path):
        """Test a completed run without a trace file is 404"""
        run = ExperimentRunFactory(status=ExperimentRun.Status.COMPLETED, output_dir=str(tmp_path / 'gone'))
        response = api_client.get(f'/api/experiments/runs/{run.id}/trace/')
        assert response.status_code == status.HTTP_404_NOT_FOUND
