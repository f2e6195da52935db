from django.db import models


class ExperimentRecord(models.Model):
    """Self-contained result of one train or sweep run"""
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('finished', 'Finished'),
        ('failed', 'Failed'),
    ]

    run_id = models.CharField(max_length=32, unique=True, help_text="md5 of the resolved config")
    kind = models.CharField(max_length=16, help_text="train or sweep")
    figure = models.CharField(max_length=32, blank=True, default='')
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default='running')

    # u64 seeds do not fit a signed bigint
    seed = models.CharField(max_length=20)
    tool_version = models.CharField(max_length=32)
    schema_version = models.PositiveIntegerField(default=1)
    cutoff = models.PositiveIntegerField(null=True, blank=True, help_text="Fock cutoff finally used")

    config = models.JSONField(help_text="Fully resolved experiment config")
    payload = models.JSONField(default=dict, blank=True)
    diagnostics = models.JSONField(default=dict, blank=True, help_text="Leakage, cutoff and warnings")
    timings = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=512, blank=True, default='')

    started_at = models.DateTimeField()
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']
        indexes = [
            models.Index(fields=['kind', 'figure']),
            models.Index(fields=['status']),
        ]

    def __str__(self):
        label = self.figure or self.kind
        return f"{label} - {self.run_id[:8]} - {self.status}"
