from django.contrib import admin
from .models import TrainingRun, EvaluationReport


@admin.register(TrainingRun)
class TrainingRunAdmin(admin.ModelAdmin):
    list_display = ['variant', 'seed', 'epochs', 'scenes', 'resumed', 'created_at']
    list_filter = ['variant', 'resumed', 'created_at']
    search_fields = ['checkpoint_path']
    date_hierarchy = 'created_at'


@admin.register(EvaluationReport)
class EvaluationReportAdmin(admin.ModelAdmin):
    list_display = ['model_path', 'variant', 'miou', 'mgsr', 'mgsr_center', 'scenes', 'created_at']
    list_filter = ['variant', 'created_at']
    search_fields = ['model_path', 'corpus_path']
    date_hierarchy = 'created_at'
