# Generated by Django 4.2.21 on 2026-10-18 09:12

from django.db import migrations, models
import uuid


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='PipelineRun',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, help_text='Unique identifier for the run', primary_key=True, serialize=False)),
                ('mode', models.CharField(choices=[('visualization', 'Visualization'), ('clustering', 'Clustering Prediction')], help_text='Application the teacher was trained for', max_length=20)),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed')], default='pending', help_text='Current status of the run', max_length=20)),
                ('seed', models.BigIntegerField(default=0, help_text='Run seed every stage seed is derived from')),
                ('config', models.JSONField(blank=True, default=dict, help_text='Resolved pipeline configuration')),
                ('report', models.JSONField(blank=True, help_text='RunReport of the finished run', null=True)),
                ('out_dir', models.CharField(blank=True, help_text='Directory the models, embeddings and report were written to', max_length=500)),
                ('error_message', models.TextField(blank=True, help_text='Failure detail for failed runs')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('started_at', models.DateTimeField(blank=True, null=True)),
                ('completed_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'verbose_name': 'Pipeline Run',
                'verbose_name_plural': 'Pipeline Runs',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['status'], name='pipeline_run_status_idx'), models.Index(fields=['mode', 'status'], name='pipeline_run_mode_status_idx')],
            },
        ),
    ]
