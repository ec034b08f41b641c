from django.db import models


class ExperimentRun(models.Model):
    """A queued training run; the worker fills in status, metric and error."""

    graph_path = models.CharField(max_length=500)
    features_path = models.CharField(max_length=500, blank=True, default="")
    labels_path = models.CharField(max_length=500, blank=True, default="")
    config_text = models.TextField(blank=True, default="")
    output_dir = models.CharField(max_length=500)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(blank=True, null=True)

    STATUS_CHOICES = [
        ("pending", "Pending"),
        ("processing", "Processing"),
        ("ready", "Ready"),
        ("failed", "Failed"),
    ]
    status = models.CharField(max_length=12, choices=STATUS_CHOICES, default="pending")
    error = models.TextField(blank=True, null=True)
    metric_name = models.CharField(max_length=8, blank=True, default="")
    metric = models.FloatField(blank=True, null=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        return f"run {self.pk} ({self.status}) {self.graph_path}"
