"""Configuration settings for the isomonodromy toolkit."""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _positive_float(name, default):
    value = float(os.getenv(name, default))
    if value <= 0:
        raise ValueError(f'{name} must be positive, got {value}')
    return value


def _positive_int(name, default):
    value = int(os.getenv(name, default))
    if value < 1:
        raise ValueError(f'{name} must be at least 1, got {value}')
    return value


# Debug mode configuration
DEBUG_MODE = os.getenv('DEBUG_MODE', 'False').lower() == 'true'

# Linear algebra tolerances
TOLERANCE = _positive_float('ISOLAB_TOL', '1e-9')  # relative equality tolerance
CLUSTER_TOLERANCE = _positive_float('ISOLAB_CLUSTER_TOL', '1e-7')  # equal eigenvalue / integer difference
DEFECT_TOLERANCE = _positive_float('ISOLAB_DEFECT_TOL', '1e-5')  # eigenvalues split by a Jordan block
SINGULAR_THRESHOLD = _positive_float('ISOLAB_SINGULAR_THRESHOLD', '1e-12')  # minimal |det|
BRANCH_CUT_SNAP = _positive_float('ISOLAB_BRANCH_CUT_SNAP', '1e-12')
CONJUGATOR_ATTEMPTS = _positive_int('ISOLAB_CONJUGATOR_ATTEMPTS', '32')
GAUGE_RESIDUAL_BOUND = _positive_float('ISOLAB_GAUGE_RESIDUAL', '1e-8')  # relative, checked after reduction

# Orbit engine
FINGERPRINT_DIGITS = _positive_int('ISOLAB_FINGERPRINT_DIGITS', '6')
ACCURACY_FACTOR = _positive_float('ISOLAB_ACCURACY_FACTOR', '1000')  # identification tol per unit of input error
ORBIT_CAP = _positive_int('ISOLAB_ORBIT_CAP', '10000')
DEFAULT_SEED = int(os.getenv('ISOLAB_SEED', '0'))
THREADS = _positive_int('ISOLAB_THREADS', '4')  # worker cap for frontier / loop transport

# Cache configuration
CACHE_MAX_SIZE = _positive_int('ISOLAB_CACHE_MAX_SIZE', '4096')  # Maximum number of entries in cache

# Integrator and Garnier settings
INTEGRATOR_RTOL = _positive_float('ISOLAB_RTOL', '1e-10')
SEPARATION_THRESHOLD = _positive_float('ISOLAB_SEPARATION', '1e-6')
LOOP_SEGMENTS = _positive_int('ISOLAB_LOOP_SEGMENTS', '64')
BRANCH_TOLERANCE = _positive_float('ISOLAB_BRANCH_TOL', '1e-6')
BRANCH_CAP = _positive_int('ISOLAB_BRANCH_CAP', '64')
BRANCH_DEPTH = _positive_int('ISOLAB_BRANCH_DEPTH', '4')
