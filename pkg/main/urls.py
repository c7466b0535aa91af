"""
URL configuration for the FMTC run registry.
"""
from django.contrib import admin
from django.urls import path, include
from django.http import JsonResponse


# Simple health check view - no database required
def health_check(request):
    """Health check endpoint; answers without touching the database."""
    return JsonResponse({
        'status': 'healthy',
        'service': 'fmtc'
    })


urlpatterns = [
    path('api/health/', health_check, name='health-check'),

    path('admin/', admin.site.urls),

    path('api/experiments/', include('experiments.urls')),
]
