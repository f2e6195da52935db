"""slaen_lab URL Configuration

Read-only inspection of stored experiment records plus closed-form baseline
curves. Experiments themselves run through the management commands.
"""
from django.contrib import admin
from django.urls import path

from sensing.views import BaselineCurveView, ExperimentRecordDetailView, ExperimentRecordListView

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/records/', ExperimentRecordListView.as_view(), name='record_list'),
    path('api/records/<str:run_id>/', ExperimentRecordDetailView.as_view(), name='record_detail'),
    path('api/baselines/', BaselineCurveView.as_view(), name='baseline_curve'),
]
