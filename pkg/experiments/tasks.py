"""
Celery tasks for the experiments app.
"""
from celery import shared_task
import logging

logger = logging.getLogger(__name__)


@shared_task(bind=True)
def process_experiment_run(self, run_id):
    """
    Execute a registered run in the background.
    """
    from experiments.config import parse_run_config
    from experiments.models import ExperimentRun
    from experiments.pipeline import execute_run

    try:
        run = ExperimentRun.objects.get(id=run_id)
    except ExperimentRun.DoesNotExist:
        logger.error(f"Experiment run {run_id} not found")
        return

    try:
        config = parse_run_config(run.config, source=f"run {run_id}")
        execute_run(config, run=run)
        logger.info(f"Experiment run {run_id} completed successfully")
    except Exception as e:
        logger.error(f"Experiment run {run_id} failed: {e}")
        run.refresh_from_db()
        if run.status != ExperimentRun.Status.FAILED:
            run.status = ExperimentRun.Status.FAILED
            run.error_message = str(e)
            run.save(update_fields=['status', 'error_message'])
