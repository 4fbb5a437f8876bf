"""
Persisted experiment runs.

One row per simulated run, carrying the same columns as the CSV output plus the
completion flag and the trace hash. Rows are written by `run --save` / `sweep --save`
and read back by `compare --from-db`.
"""

from django.db import models

from apps.metrics.metrics import Metrics
from apps.protocol.messages import Method


class ExperimentRun(models.Model):
    """
    Metrics of a single run.

    Runs are immutable once stored; re-running the same cell with the same seed
    produces the same trace_hash, which makes duplicates easy to spot.
    """

    class MethodChoice(models.TextChoices):
        ACTIVE = Method.ACTIVE.value, "Active"
        DS = Method.DS.value, "Simple diffusion"
        DF = Method.DF.value, "Diffusion with feedback"
        DM = Method.DM.value, "Diffusion with feedback and final merge"

    label = models.CharField(
        max_length=100,
        blank=True,
        db_index=True,
        help_text="Free-form sweep name used to group runs, e.g. 'task-sweep-n100'",
    )
    method = models.CharField(max_length=10, choices=MethodChoice.choices)
    n = models.PositiveIntegerField()
    tasks = models.PositiveIntegerField()
    seed = models.PositiveBigIntegerField()
    c_r = models.FloatField()
    m_r = models.FloatField()

    t_dist = models.FloatField()
    efficiency_pct = models.FloatField()
    msg_token = models.PositiveBigIntegerField()
    msg_down = models.PositiveBigIntegerField()
    msg_feedback = models.PositiveBigIntegerField()
    msg_final = models.PositiveBigIntegerField()
    replicated = models.PositiveIntegerField()
    t_propagate = models.FloatField(null=True, blank=True)

    complete = models.BooleanField(default=True)
    trace_hash = models.CharField(max_length=64)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["method", "n", "tasks", "c_r", "m_r", "seed"]
        indexes = [
            models.Index(fields=["method", "n", "tasks"], name="experiment_method_n_tasks_idx"),
        ]

    def __str__(self) -> str:
        return f"{self.method} n={self.n} tasks={self.tasks} seed={self.seed}: {self.efficiency_pct:.2f}%"

    def save(self, *args, **kwargs):
        """
        Raises:
            RuntimeError: If attempting to update a stored run.
        """
        if self.pk:
            raise RuntimeError("ExperimentRun rows are immutable and cannot be updated.")
        super().save(*args, **kwargs)

    @classmethod
    def from_metrics(cls, metrics: Metrics, trace_hash: str, label: str = "") -> "ExperimentRun":
        """Build an unsaved row from run metrics."""
        return cls(
            label=label,
            method=metrics.method,
            n=metrics.n,
            tasks=metrics.tasks,
            seed=metrics.seed,
            c_r=metrics.c_r,
            m_r=metrics.m_r,
            t_dist=metrics.t_distributed,
            efficiency_pct=metrics.efficiency_pct,
            msg_token=metrics.msg_token,
            msg_down=metrics.msg_down,
            msg_feedback=metrics.msg_feedback,
            msg_final=metrics.msg_final,
            replicated=metrics.replicated,
            t_propagate=metrics.t_propagate,
            complete=metrics.complete,
            trace_hash=trace_hash,
        )

    def to_metrics(self) -> Metrics:
        return Metrics(
            method=self.method,
            n=self.n,
            tasks=self.tasks,
            seed=self.seed,
            c_r=self.c_r,
            m_r=self.m_r,
            t_sequential=self.efficiency_pct / 100.0 * self.t_dist * self.n,
            t_distributed=self.t_dist,
            efficiency_pct=self.efficiency_pct,
            msg_token=self.msg_token,
            msg_down=self.msg_down,
            msg_feedback=self.msg_feedback,
            msg_final=self.msg_final,
            msg_dropped=0,
            replicated=self.replicated,
            t_propagate=self.t_propagate,
            complete=self.complete,
        )
