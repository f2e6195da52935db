# Generated by Django 3.2.23 on 2026-10-18 09:41

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('run_id', models.CharField(help_text='md5 of the resolved config', max_length=32, unique=True)),
                ('kind', models.CharField(help_text='train or sweep', max_length=16)),
                ('figure', models.CharField(blank=True, default='', max_length=32)),
                ('status', models.CharField(choices=[('running', 'Running'), ('finished', 'Finished'), ('failed', 'Failed')], default='running', max_length=16)),
                ('seed', models.CharField(max_length=20)),
                ('tool_version', models.CharField(max_length=32)),
                ('schema_version', models.PositiveIntegerField(default=1)),
                ('cutoff', models.PositiveIntegerField(blank=True, help_text='Fock cutoff finally used', null=True)),
                ('config', models.JSONField(help_text='Fully resolved experiment config')),
                ('payload', models.JSONField(blank=True, default=dict)),
                ('diagnostics', models.JSONField(blank=True, default=dict, help_text='Leakage, cutoff and warnings')),
                ('timings', models.JSONField(blank=True, default=dict)),
                ('output_dir', models.CharField(blank=True, default='', max_length=512)),
                ('started_at', models.DateTimeField()),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-started_at'],
            },
        ),
        migrations.AddIndex(
            model_name='experimentrecord',
            index=models.Index(fields=['kind', 'figure'], name='sensing_exp_kind_3f1c2a_idx'),
        ),
        migrations.AddIndex(
            model_name='experimentrecord',
            index=models.Index(fields=['status'], name='sensing_exp_status_8d0e4b_idx'),
        ),
    ]
