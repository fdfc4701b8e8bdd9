from django.contrib import admin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['run_id', 'landscape_id', 'status', 'critical_depth', 'rate', 'fitted_slope',
                    'bound_holds', 'created_at']
    list_filter = ['status', 'landscape_id', 'bound_holds']
    search_fields = ['run_id', 'landscape_id', 'content_hash']
    readonly_fields = ['created_at', 'finished_at', 'content_hash']
    date_hierarchy = 'created_at'
