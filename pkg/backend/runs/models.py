from __future__ import annotations

from django.db import models

COMMAND_CHOICES = [
    ("publish", "Publish"),
    ("dpcheck", "Empirical DP check"),
]


class PublishRun(models.Model):
    """One successful run, kept for bookkeeping. The manifest file on disk is the authoritative record."""

    command = models.CharField(max_length=16, choices=COMMAND_CHOICES, default="publish")
    mechanism = models.CharField(max_length=16)
    seed = models.BigIntegerField()
    total_epsilon = models.FloatField()
    max_path_sum = models.FloatField(null=True, blank=True)
    input_sha256 = models.CharField(max_length=64)
    manifest_path = models.CharField(max_length=1024, blank=True, default="")
    published_count = models.PositiveIntegerField(default=0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at", "-id"]

    def __str__(self) -> str:
        return f"{self.command} · {self.mechanism} eps={self.total_epsilon:g} seed={self.seed}"
