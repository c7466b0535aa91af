"""
Score a saved model in-sample and on the held-out split.
"""
import json
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from experiments.config import load_run_config
from experiments.persistence import write_metrics
from experiments.pipeline import evaluate_model
from main.exceptions import FmtcError


class Command(BaseCommand):
    help = 'Evaluate a saved model (IS and OOS ACC/NMI/RI) on labelled client data'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='Run config; supplies model dir, data, labels and split')
        parser.add_argument('--model-dir', type=str, help='Run output directory holding model/')
        parser.add_argument('--data', nargs='+', default=None, help='Client CSV files, in client order')
        parser.add_argument('--labels', nargs='+', default=None, help='Label files, in client order')
        parser.add_argument('--test-fraction', type=float, default=None, help='Held-out fraction')
        parser.add_argument('--seed', type=int, default=None, help='Split seed (default: the model seed)')
        parser.add_argument('--output', type=str, default=None, help='Where to write evaluation.json')

    def handle(self, *args, **options):
        try:
            if options['config']:
                config = load_run_config(options['config'])
                model_dir = Path(options['model_dir'] or config.output_dir)
                data_paths = options['data'] or config.data_paths
                label_paths = options['labels'] or config.label_paths
                fraction = options['test_fraction'] if options['test_fraction'] is not None else config.test_fraction
            else:
                if not options['model_dir'] or not options['data']:
                    raise CommandError('Either --config or both --model-dir and --data are required')
                model_dir = Path(options['model_dir'])
                data_paths = options['data']
                label_paths = options['labels']
                fraction = options['test_fraction'] if options['test_fraction'] is not None else settings.FMTC_TEST_FRACTION
            result = evaluate_model(model_dir, data_paths, label_paths, fraction, seed=options['seed'])
            output = Path(options['output']) if options['output'] else model_dir / 'evaluation.json'
            write_metrics(output, result)
        except FmtcError as e:
            raise CommandError(str(e)) from e

        self.stdout.write(json.dumps(result['mean'], sort_keys=True))
        self.stdout.write(self.style.SUCCESS(f"Evaluation written to {output}"))
