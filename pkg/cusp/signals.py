import django_rq
from django.db.models.signals import post_save
from django.dispatch import receiver

from .models import ExperimentRun


@receiver(post_save, sender=ExperimentRun)
def enqueue_run(sender, instance, created, **kwargs):
    """Queue a training job for every new pending run."""
    if not created or instance.status != "pending":
        return
    queue = django_rq.get_queue("default")
    job_id = f"run-{instance.pk}-train"
    if not queue.fetch_job(job_id):
        queue.enqueue("cusp.tasks.process_run", instance.pk, job_id=job_id)
