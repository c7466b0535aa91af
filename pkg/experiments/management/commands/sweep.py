"""
Alpha/beta sensitivity grid for a run config.
"""
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from experiments.config import load_run_config
from experiments.persistence import write_metrics
from experiments.pipeline import sensitivity_sweep
from main.exceptions import FmtcError


class Command(BaseCommand):
    help = 'Mean client ACC/NMI/RI over an alpha x beta grid (writes sensitivity.json)'

    def add_arguments(self, parser):
        parser.add_argument('config', type=str, help='Path to the JSON run config')
        parser.add_argument('--alphas', nargs='+', type=float, default=[0.01, 0.1, 1.0, 10.0, 100.0])
        parser.add_argument('--betas', nargs='+', type=float, default=[0.0, 0.01, 0.1, 1.0, 10.0])
        parser.add_argument('--output', type=str, default=None, help='Default: <output_dir>/sensitivity.json')

    def handle(self, *args, **options):
        try:
            config = load_run_config(options['config'])
            results = sensitivity_sweep(config, options['alphas'], options['betas'])
            output = Path(options['output']) if options['output'] else Path(config.output_dir) / 'sensitivity.json'
            write_metrics(output, {'grid': results})
        except FmtcError as e:
            raise CommandError(str(e)) from e
        best = max(results, key=lambda row: row['acc'])
        self.stdout.write(self.style.SUCCESS(
            f"{len(results)} settings evaluated; best acc {best['acc']:.4f} at "
            f"alpha={best['alpha']}, beta={best['beta']}; written to {output}"
        ))
