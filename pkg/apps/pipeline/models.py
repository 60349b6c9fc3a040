import logging
import uuid

from django.db import models
from django.utils import timezone
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import ArgumentError

audit_logger = logging.getLogger('compressive_mbn.audit')


class PipelineRun(models.Model):
    """
    Record of one `pipeline` command invocation.
    Holds the config echo on start and the RunReport JSON on completion.
    """

    class Mode(models.TextChoices):
        VISUALIZATION = 'visualization', _('Visualization')
        CLUSTERING = 'clustering', _('Clustering Prediction')

    class Status(models.TextChoices):
        PENDING = 'pending', _('Pending')
        RUNNING = 'running', _('Running')
        COMPLETED = 'completed', _('Completed')
        FAILED = 'failed', _('Failed')

    id = models.UUIDField(
        primary_key=True,
        default=uuid.uuid4,
        editable=False,
        help_text=_('Unique identifier for the run')
    )
    mode = models.CharField(
        max_length=20,
        choices=Mode.choices,
        help_text=_('Application the teacher was trained for')
    )
    status = models.CharField(
        max_length=20,
        choices=Status.choices,
        default=Status.PENDING,
        help_text=_('Current status of the run')
    )
    seed = models.BigIntegerField(
        default=0,
        help_text=_('Run seed every stage seed is derived from')
    )
    config = models.JSONField(
        default=dict,
        blank=True,
        help_text=_('Resolved pipeline configuration')
    )
    report = models.JSONField(
        null=True,
        blank=True,
        help_text=_('RunReport of the finished run')
    )
    out_dir = models.CharField(
        max_length=500,
        blank=True,
        help_text=_('Directory the models, embeddings and report were written to')
    )
    error_message = models.TextField(
        blank=True,
        help_text=_('Failure detail for failed runs')
    )

    created_at = models.DateTimeField(auto_now_add=True)
    started_at = models.DateTimeField(null=True, blank=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name = _('Pipeline Run')
        verbose_name_plural = _('Pipeline Runs')
        indexes = [
            models.Index(fields=['status'], name='pipeline_run_status_idx'),
            models.Index(fields=['mode', 'status'], name='pipeline_run_mode_status_idx'),
        ]

    def __str__(self):
        return f"{self.get_mode_display()} run {self.pk} ({self.get_status_display()})"

    def can_transition_to(self, new_status):
        new_status_value = new_status.value if hasattr(new_status, 'value') else new_status
        return RunStatusManager().can_transition(self.status, new_status_value)

    def transition_to(self, new_status, message=''):
        """Move to new_status, stamping timestamps and writing an audit record"""
        new_status_value = new_status.value if hasattr(new_status, 'value') else new_status
        error = RunStatusManager().validate_transition(self.status, new_status_value)
        if error:
            raise ArgumentError(error)

        old_status = self.status
        self.status = new_status_value
        if new_status_value == self.Status.RUNNING:
            self.started_at = timezone.now()
        elif new_status_value in (self.Status.COMPLETED, self.Status.FAILED):
            self.completed_at = timezone.now()
        elif new_status_value == self.Status.PENDING:
            self.started_at = None
            self.completed_at = None
            self.error_message = ''
        if new_status_value == self.Status.FAILED:
            self.error_message = message
        self.save()

        audit_logger.info(
            f"{old_status} -> {new_status_value} {message}".rstrip(),
            extra={'run_id': str(self.pk), 'status': new_status_value},
        )

    def record_report(self, report):
        """Store the RunReport and complete the run"""
        self.report = report.to_dict()
        self.transition_to(self.Status.COMPLETED)

    @property
    def duration(self):
        if self.started_at and self.completed_at:
            return self.completed_at - self.started_at
        return None


class RunStatusManager:
    """
    Manages run status transitions.
    Failed runs can be reset to pending and retried.
    """

    ALLOWED_TRANSITIONS = {
        'pending': ['running'],
        'running': ['completed', 'failed'],
        'completed': [],
        'failed': ['pending'],
    }

    def can_transition(self, from_status, to_status):
        return to_status in self.ALLOWED_TRANSITIONS.get(from_status, [])

    def get_next_allowed_statuses(self, current_status):
        return self.ALLOWED_TRANSITIONS.get(current_status, [])

    def validate_transition(self, from_status, to_status):
        """
        Validate a status transition and return error message if invalid.

        Returns:
            str or None: Error message if invalid, None if valid
        """
        if not self.can_transition(from_status, to_status):
            allowed = self.get_next_allowed_statuses(from_status)
            return f"Cannot transition from '{from_status}' to '{to_status}'. Allowed transitions: {allowed}"
        return None
