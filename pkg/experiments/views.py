from django.shortcuts import get_object_or_404
from rest_framework import generics, status
from rest_framework.decorators import api_view
from rest_framework.pagination import PageNumberPagination
from rest_framework.response import Response

from main.exceptions import DataFormatError

from .models import ExperimentRun
from .persistence import read_trace
from .serializers import ExperimentRunSerializer


class ExperimentRunPagination(PageNumberPagination):
    page_size = 20
    page_size_query_param = 'page_size'
    max_page_size = 100


class ExperimentRunListView(generics.ListAPIView):
    """List registered runs, newest first; ?status= filters."""
    serializer_class = ExperimentRunSerializer
    pagination_class = ExperimentRunPagination

    def get_queryset(self):
        queryset = ExperimentRun.objects.all()
        run_status = self.request.query_params.get('status')
        if run_status:
            queryset = queryset.filter(status=run_status.upper())
        return queryset


class ExperimentRunDetailView(generics.RetrieveAPIView):
    queryset = ExperimentRun.objects.all()
    serializer_class = ExperimentRunSerializer


@api_view(['GET'])
def experiment_run_trace(request, pk):
    """The run's trace.jsonl as a JSON array."""
    run = get_object_or_404(ExperimentRun, pk=pk)
    if run.status != ExperimentRun.Status.COMPLETED:
        return Response(
            {'error': f'Run is {run.get_status_display().lower()}; no trace available'},
            status=status.HTTP_409_CONFLICT
        )
    try:
        records = read_trace(run.trace_path)
    except DataFormatError as e:
        return Response({'error': str(e)}, status=status.HTTP_404_NOT_FOUND)
    return Response({'run': run.id, 'count': len(records), 'records': records})
