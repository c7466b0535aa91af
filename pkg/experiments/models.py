from django.db import models


class ExperimentRun(models.Model):
    """
    One execution of the federated clustering pipeline and where its outputs went.
    """

    class Status(models.TextChoices):
        PENDING = 'PENDING', 'Pending'
        PROCESSING = 'PROCESSING', 'Processing'
        COMPLETED = 'COMPLETED', 'Completed'
        FAILED = 'FAILED', 'Failed'

    name = models.CharField(max_length=255, blank=True, default='')
    status = models.CharField(
        max_length=20,
        choices=Status.choices,
        default=Status.PENDING
    )
    config = models.JSONField(
        help_text='Validated run configuration'
    )
    output_dir = models.CharField(
        max_length=500,
        help_text='Directory holding model/, trace.jsonl and metrics.json'
    )
    rounds_completed = models.IntegerField(default=0)
    converged = models.BooleanField(default=False)
    final_primal_residual = models.FloatField(blank=True, null=True)
    metrics = models.JSONField(
        blank=True,
        null=True,
        help_text='Contents of metrics.json once the run completes'
    )
    error_message = models.TextField(
        blank=True,
        null=True,
        help_text='Error message if the run failed'
    )
    created_at = models.DateTimeField(auto_now_add=True)
    completed_at = models.DateTimeField(blank=True, null=True)

    class Meta:
        db_table = 'experiment_runs'
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['status'], name='experiment__status_5c1d2e_idx'),
            models.Index(fields=['created_at'], name='experiment__created_9a41b7_idx'),
        ]

    def __str__(self):
        return f"{self.name or 'run'} #{self.pk} ({self.status})"

    @property
    def trace_path(self):
        from pathlib import Path
        return Path(self.output_dir) / 'trace.jsonl'
