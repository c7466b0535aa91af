from django.contrib import admin
from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['name', 'status', 'rounds_completed', 'converged', 'final_primal_residual', 'created_at', 'completed_at']
    list_filter = ['status', 'converged', 'created_at']
    search_fields = ['name', 'output_dir']
    readonly_fields = ['created_at', 'completed_at']
    ordering = ['-created_at']
