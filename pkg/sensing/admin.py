from django.contrib import admin

from .models import ExperimentRecord


@admin.register(ExperimentRecord)
class ExperimentRecordAdmin(admin.ModelAdmin):
    list_display = ('run_id', 'kind', 'figure', 'status', 'seed', 'cutoff', 'started_at', 'finished_at')
    list_filter = ('kind', 'figure', 'status')
    search_fields = ('run_id', 'figure')
    readonly_fields = ('run_id', 'config', 'payload', 'diagnostics', 'timings')
