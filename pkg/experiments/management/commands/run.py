"""
Fit the federated model described by a run config and write its outputs.
"""
from django.core.management.base import BaseCommand, CommandError

from experiments.config import load_run_config
from experiments.models import ExperimentRun
from experiments.pipeline import execute_run
from experiments.tasks import process_experiment_run
from main.exceptions import FmtcError


class Command(BaseCommand):
    help = 'Run FMTC on the clients listed in a JSON config (model/, trace.jsonl, metrics.json)'

    def add_arguments(self, parser):
        parser.add_argument('config', type=str, help='Path to the JSON run config')
        parser.add_argument('--name', type=str, default=None, help='Run name (default: name from the config)')
        parser.add_argument(
            '--background',
            action='store_true',
            help='Queue the run on Celery instead of running it inline',
        )

    def handle(self, *args, **options):
        try:
            config = load_run_config(options['config'])
        except FmtcError as e:
            raise CommandError(str(e)) from e
        if options['name']:
            config.name = options['name']

        run = ExperimentRun.objects.create(
            name=config.name,
            config=config.as_dict(),
            output_dir=str(config.output_dir),
        )

        if options['background']:
            process_experiment_run.delay(run.id)
            self.stdout.write(self.style.SUCCESS(f"Queued run {run.id}"))
            return

        try:
            result = execute_run(config, run=run)
        except FmtcError as e:
            raise CommandError(str(e)) from e

        mean = result.metrics['mean']['in_sample']
        summary = f", mean ACC {mean['acc']:.4f}" if mean else ''
        self.stdout.write(self.style.SUCCESS(
            f"Run {run.id}: {result.metrics['rounds']} rounds, "
            f"converged={result.metrics['converged']}{summary}; outputs in {result.output_dir}"
        ))
