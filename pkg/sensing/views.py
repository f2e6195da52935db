from django.shortcuts import get_object_or_404
from rest_framework import generics, status
from rest_framework.permissions import AllowAny
from rest_framework.response import Response
from rest_framework.views import APIView

from .exceptions import SensingError
from .models import ExperimentRecord
from .serializers import BaselineRequestSerializer, ExperimentRecordSerializer, ExperimentRecordSummarySerializer
from .services.baselines import BaselineCurveService


class ExperimentRecordListView(generics.ListAPIView):
    """Stored experiment records, newest first; filter with ?kind= and ?figure="""
    permission_classes = [AllowAny]
    serializer_class = ExperimentRecordSummarySerializer

    def get_queryset(self):
        queryset = ExperimentRecord.objects.all()
        for field in ('kind', 'figure', 'status'):
            value = self.request.query_params.get(field)
            if value:
                queryset = queryset.filter(**{field: value})
        return queryset


class ExperimentRecordDetailView(APIView):
    """Full record including the resolved config and payload"""
    permission_classes = [AllowAny]

    def get(self, request, run_id):
        record = get_object_or_404(ExperimentRecord, run_id=run_id)
        return Response(ExperimentRecordSerializer(record).data)


class BaselineCurveView(APIView):
    """
    API endpoint for closed-form baseline curves
    """
    permission_classes = [AllowAny]

    def post(self, request):
        serializer = BaselineRequestSerializer(data=request.data)
        if not serializer.is_valid():
            return Response(
                {'error': 'Invalid input data', 'details': serializer.errors},
                status=status.HTTP_400_BAD_REQUEST
            )

        params = serializer.validated_data
        service = BaselineCurveService()
        try:
            return Response(service.curve(params))
        except SensingError as e:
            service.log_warning(f"Baseline {params['method']} rejected: {e}")
            return Response({'error': str(e)}, status=status.HTTP_400_BAD_REQUEST)
        except Exception as e:
            service.log_error("Error computing baseline curve", e)
            return Response(
                {'error': 'An unexpected error occurred while computing the curve'},
                status=status.HTTP_500_INTERNAL_SERVER_ERROR
            )
