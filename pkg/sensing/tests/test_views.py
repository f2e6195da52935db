import hashlib

import pytest
from django.core.cache import cache
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APIClient

from sensing.services.baselines import BaselineCurveService
from sensing.tests.factories import ExperimentRecordFactory
from sensing.utils import canonical_json


@pytest.fixture
def api_client():
    return APIClient()


@pytest.mark.django_db
class TestRecordViews:
    def test_list_is_paginated_and_filterable(self, api_client):
        ExperimentRecordFactory.create_batch(3)
        ExperimentRecordFactory(kind='sweep', figure='fig3a')

        response = api_client.get(reverse('record_list'))
        assert response.status_code == status.HTTP_200_OK
        assert response.data['count'] == 4
        assert 'config' not in response.data['results'][0]

        response = api_client.get(reverse('record_list'), {'kind': 'sweep'})
        assert response.data['count'] == 1
        assert response.data['results'][0]['figure'] == 'fig3a'

    def test_detail(self, api_client):
        record = ExperimentRecordFactory()
        response = api_client.get(reverse('record_detail', args=[record.run_id]))
        assert response.status_code == status.HTTP_200_OK
        assert response.data['payload'] == {'error_probability': 0.01}
        assert response.data['config']['kind'] == 'train'

    def test_unknown_record(self, api_client):
        response = api_client.get(reverse('record_detail', args=['f' * 32]))
        assert response.status_code == status.HTTP_404_NOT_FOUND


@pytest.mark.django_db
class TestBaselineView:
    def test_homodyne_curve(self, api_client):
        response = api_client.post(reverse('baseline_curve'),
                                   {'method': 'gaussian-homodyne', 'epsilon': [0.0, 0.45]}, format='json')
        assert response.status_code == status.HTTP_200_OK
        points = response.data['points']
        assert points[0]['error_probability'] == pytest.approx(0.5)
        assert points[1]['error_probability'] == pytest.approx(0.0148, abs=5e-4)

    def test_second_request_is_served_from_cache(self, api_client):
        body = {'method': 'number-interferometry', 'epsilon': [0.5, 1.0], 'fock': 1}
        first = api_client.post(reverse('baseline_curve'), body, format='json')
        second = api_client.post(reverse('baseline_curve'), body, format='json')
        assert first.data == second.data

    def test_service_reuses_the_cached_curve(self, monkeypatch):
        params = {'method': 'gaussian-homodyne', 'epsilon': [0.45], 'energy': 1.0, 'fock': 1, 'cutoff': None}
        service = BaselineCurveService()
        first = service.curve(params)
        assert cache.get(service.cache_key(hashlib.md5(canonical_json(params).encode()).hexdigest())) == first

        monkeypatch.setattr('sensing.services.baselines.baseline_value', lambda *args: pytest.fail('recomputed'))
        assert service.curve(params) == first

    @pytest.mark.parametrize('body', [
        {'method': 'coin-flip', 'epsilon': [0.1]},
        {'method': 'gaussian-homodyne', 'epsilon': []},
        {'method': 'photon-counting', 'epsilon': [0.01 * i for i in range(26)]},
        {'method': 'on-state', 'epsilon': [0.5], 'cutoff': 20000},
        {'method': 'number-interferometry', 'epsilon': [0.5], 'fock': 10 ** 9},
    ])
    def test_invalid_requests(self, api_client, body):
        response = api_client.post(reverse('baseline_curve'), body, format='json')
        assert response.status_code == status.HTTP_400_BAD_REQUEST
        assert response.data['error'] == 'Invalid input data'
