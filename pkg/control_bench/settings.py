"""
Django settings for the control_bench project.

The project hosts a single app, kktsolver, driven through management commands
(solve, bench, eigcheck). No database is used.

Every KKT_* value can be overridden through the environment or a .env file
(python-decouple).
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='control-bench-local')

# Environment detection: 'local' or 'ci'
ENVIRONMENT = config('KKT_ENV', default='local')

DEBUG = config('DEBUG', default=ENVIRONMENT == 'local', cast=bool)
ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'kktsolver',
]

DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Solver settings

# Results directory used when neither --out-dir nor output.dir is given
KKT_OUTPUT_DIR = config('KKT_OUTPUT_DIR', default=str(BASE_DIR / 'results'))

# Dense oracles (LU, eigenvalues) refuse larger instances
KKT_DENSE_MAX_DIM = config('KKT_DENSE_MAX_DIM', default=5000, cast=int)
KKT_EIGCHECK_MAX_DIM = config('KKT_EIGCHECK_MAX_DIM', default=1000, cast=int)
KKT_IDEAL_MAX_DIM = config('KKT_IDEAL_MAX_DIM', default=4000, cast=int)

# Cells per axis on the coarsest multigrid mesh
KKT_COARSE_CELLS = config('KKT_COARSE_CELLS', default=2, cast=int)

KKT_LOG_LEVEL = config('KKT_LOG_LEVEL', default='INFO')


# Logging configuration - solver progress on stderr, command output on stdout
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'kktsolver': {
            'handlers': ['console'],
            'level': KKT_LOG_LEVEL,
            'propagate': False,
        },
    },
}
