import logging
from typing import Any, Optional

from django.conf import settings
from django.core.cache import cache

logger = logging.getLogger(__name__)


def setting(name: str, default: Any) -> Any:
    """Read a numerical default from settings, falling back when unconfigured"""
    try:
        return getattr(settings, name, default)
    except Exception:
        # worker processes without DJANGO_SETTINGS_MODULE
        return default


class BaseService:
    """Shared cache access and logging for the sensing services"""

    cache_prefix = 'sensing'

    def __init__(self):
        self.cache_ttl = setting('CACHE_TTL', 3600)

    def cache_key(self, digest: str) -> str:
        return f"{self.cache_prefix}:{digest}"

    def get_from_cache(self, cache_key: str) -> Optional[Any]:
        # a broken cache backend degrades to recomputation
        try:
            return cache.get(cache_key)
        except Exception as e:
            logger.warning(f"Cache read failed for {cache_key}: {e}")
            return None

    def set_cache(self, cache_key: str, data: Any, ttl: Optional[int] = None) -> bool:
        try:
            cache.set(cache_key, data, ttl or self.cache_ttl)
        except Exception as e:
            logger.warning(f"Cache write failed for {cache_key}: {e}")
            return False
        return True

    def log_error(self, message: str, exception: Exception = None):
        if exception is None:
            logger.error(message)
        else:
            logger.error(f"{message}: {exception}", exc_info=True)

    def log_warning(self, message: str):
        logger.warning(message)

    def log_info(self, message: str):
        logger.info(message)
