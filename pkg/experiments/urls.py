from django.urls import path
from . import views

urlpatterns = [
    path('runs/', views.ExperimentRunListView.as_view(), name='experiment-run-list'),
    path('runs/<int:pk>/', views.ExperimentRunDetailView.as_view(), name='experiment-run-detail'),
    path('runs/<int:pk>/trace/', views.experiment_run_trace, name='experiment-run-trace'),
]
