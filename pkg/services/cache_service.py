"""Cache service module for memoizing expensive numerical results."""
import logging
import threading

from cachetools import LRUCache

logger = logging.getLogger(__name__)

class CacheService:
    """Thread-safe LRU cache for continuation endpoints and conjugacy decisions."""

    def __init__(self, max_size=1000, name='cache'):
        """
        Initialize the cache service.

        Args:
            max_size (int): Maximum number of items to keep in cache
            name (str): Label used in log messages
        """
        self.max_size = max_size
        self.name = name
        self._cache = LRUCache(maxsize=max_size)
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        logger.debug(f"Cache '{name}' initialized with max size: {max_size}")

    def get(self, key):
        """
        Get an item from the cache.

        Args:
            key: The key to look up

        Returns:
            The cached value or None if not found
        """
        with self._lock:
            value = self._cache.get(key)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
                logger.debug(f"Cache '{self.name}' hit: {key}")
        return value

    def set(self, key, value):
        """Store an item; the least recently used entry is evicted when full."""
        with self._lock:
            self._cache[key] = value
        return True

    def get_or_compute(self, key, compute):
        """Return the cached value for ``key``, computing and storing it on a miss."""
        value = self.get(key)
        if value is None:
            value = compute()
            self.set(key, value)
        return value

    def clear(self):
        """Clear the entire cache."""
        with self._lock:
            self._cache.clear()
            self.hits = 0
            self.misses = 0
        logger.debug(f"Cache '{self.name}' cleared")

    def size(self):
        """Return the current cache size."""
        return len(self._cache)
