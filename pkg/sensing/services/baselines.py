import hashlib
from typing import Any, Dict

from ..serializers import serialize_points
from ..utils import canonical_json, to_jsonable
from .analytics import baseline_value
from .base import BaseService


class BaselineCurveService(BaseService):
    """Closed-form and simulated baseline curves, cached per request"""

    cache_prefix = 'baseline_curve'

    def curve(self, params: Dict[str, Any]) -> Dict[str, Any]:
        key = self.cache_key(hashlib.md5(canonical_json(params).encode()).hexdigest())
        cached = self.get_from_cache(key)
        if cached is not None:
            self.log_info(f"Returning cached {params['method']} curve")
            return cached

        values = [
            baseline_value(params['method'], e, params['energy'], params['fock'], params['cutoff'])
            for e in params['epsilon']
        ]
        result = to_jsonable({
            'method': params['method'],
            'energy': params['energy'],
            'points': serialize_points(params['epsilon'], values),
        })
        self.set_cache(key, result)
        return result
