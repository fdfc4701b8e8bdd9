from django.db import models


class ExperimentRun(models.Model):
    """One annealing run; mirrors the STATUS marker of its run directory."""
    STATUS_INCOMPLETE = 'incomplete'
    STATUS_COMPLETE = 'complete'
    STATUS_FAILED = 'failed'
    STATUS_CHOICES = [
        (STATUS_INCOMPLETE, 'Incomplete'),
        (STATUS_COMPLETE, 'Complete'),
        (STATUS_FAILED, 'Failed'),
    ]

    run_id = models.CharField(max_length=100, unique=True)
    command = models.CharField(max_length=50, default='anneal')
    landscape_id = models.CharField(max_length=50)
    config = models.JSONField(default=dict)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default=STATUS_INCOMPLETE)
    output_dir = models.CharField(max_length=500)

    # Outcome
    critical_depth = models.FloatField(null=True, blank=True)
    rate = models.FloatField(null=True, blank=True)
    fitted_slope = models.FloatField(null=True, blank=True)
    bound_holds = models.BooleanField(null=True, blank=True)
    divergence_fraction = models.FloatField(null=True, blank=True)
    content_hash = models.CharField(max_length=64, blank=True)

    # Timestamps
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        verbose_name = 'Experiment run'
        verbose_name_plural = 'Experiment runs'
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['landscape_id', 'status'], name='run_landscape_status_idx'),
        ]

    def __str__(self):
        return f"{self.run_id} ({self.status})"
