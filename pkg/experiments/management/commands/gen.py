"""
Generate the synthetic Gaussian-blob benchmark: one CSV and one label file
per client, plus a run config pointing at them.
"""
import json
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from experiments.config import parse_synthetic_spec
from experiments.datasets import generate_synthetic, write_client_csv
from main.exceptions import FmtcError


class Command(BaseCommand):
    help = 'Generate per-client synthetic blob data (CSV + labels) and a matching run config'

    def add_arguments(self, parser):
        parser.add_argument('--output-dir', type=str, required=True, help='Directory for the generated files')
        parser.add_argument('--clients', type=int, default=3, help='Number of clients (default: 3)')
        parser.add_argument('--clusters', type=int, default=3, help='Clusters per client (default: 3)')
        parser.add_argument('--features', type=int, default=5, help='Feature count d (default: 5)')
        parser.add_argument('--samples', type=int, default=60, help='Samples per client (default: 60)')
        parser.add_argument(
            '--separation',
            type=float,
            default=8.0,
            help='Distance between cluster means in within-cluster std units (default: 8)',
        )
        parser.add_argument(
            '--mean-shift',
            type=float,
            default=0.0,
            help='Norm of the per-client mean shift (default: 0)',
        )
        parser.add_argument('--seed', type=int, default=None, help='Random seed (default: FMTC_DEFAULT_SEED)')

    def handle(self, *args, **options):
        output_dir = Path(options['output_dir'])
        seed = options['seed'] if options['seed'] is not None else settings.FMTC_DEFAULT_SEED
        try:
            spec = parse_synthetic_spec({
                'clients': options['clients'],
                'clusters': options['clusters'],
                'features': options['features'],
                'samples': options['samples'],
                'separation': options['separation'],
                'mean_shift': options['mean_shift'],
                'seed': seed,
            })
            clients = generate_synthetic(spec)
            data_paths, label_paths = [], []
            for idx, (x, labels) in enumerate(clients):
                data_path, label_path = write_client_csv(output_dir / f"client_{idx}.csv", x, labels)
                data_paths.append(data_path.name)
                label_paths.append(label_path.name)
        except FmtcError as e:
            raise CommandError(str(e)) from e

        config = {
            'schema_version': 1,
            'name': f"synthetic-{spec.clients}x{spec.samples}-seed{spec.seed}",
            'data_paths': data_paths,
            'label_paths': label_paths,
            'output_dir': str((output_dir / 'run').resolve()),
            'hyperparameters': {'clusters': spec.clusters, 'seed': spec.seed},
        }
        (output_dir / 'config.json').write_text(json.dumps(config, indent=2) + '\n')
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {spec.clients} clients and config.json to {output_dir}"
        ))
