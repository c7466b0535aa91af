from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(blank=True, default='', max_length=255)),
                ('status', models.CharField(choices=[('PENDING', 'Pending'), ('PROCESSING', 'Processing'), ('COMPLETED', 'Completed'), ('FAILED', 'Failed')], default='PENDING', max_length=20)),
                ('config', models.JSONField(help_text='Validated run configuration')),
                ('output_dir', models.CharField(help_text='Directory holding model/, trace.jsonl and metrics.json', max_length=500)),
                ('rounds_completed', models.IntegerField(default=0)),
                ('converged', models.BooleanField(default=False)),
                ('final_primal_residual', models.FloatField(blank=True, null=True)),
                ('metrics', models.JSONField(blank=True, help_text='Contents of metrics.json once the run completes', null=True)),
                ('error_message', models.TextField(blank=True, help_text='Error message if the run failed', null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('completed_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'db_table': 'experiment_runs',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['status'], name='experiment__status_5c1d2e_idx'), models.Index(fields=['created_at'], name='experiment__created_9a41b7_idx')],
            },
        ),
    ]
