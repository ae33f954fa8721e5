"""Services package for the isomonodromy toolkit."""
from .linalg_service import LinalgService
from .braid_service import BraidService, artin_generator
from .exact_orbit_service import ExactOrbitOracle
from .connection_service import ConnectionService
from .garnier_service import GarnierService
from .monodromy_service import (CompanionSystem, EulerSystem, FuchsianSystem,
                                MonodromyService)
from .cache_service import CacheService

__all__ = ['LinalgService', 'BraidService', 'artin_generator', 'ExactOrbitOracle',
           'ConnectionService', 'GarnierService', 'MonodromyService', 'CompanionSystem',
           'EulerSystem', 'FuchsianSystem', 'CacheService']
