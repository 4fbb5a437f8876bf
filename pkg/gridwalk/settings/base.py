"""
Base Django settings for Gridwalk.

All environment-specific settings (local.py, production.py, test.py) extend this module.
Simulation defaults live in the GRIDWALK dict at the bottom; experiment flags override them.
"""

import math
from pathlib import Path

import environ

# ---------------------------------------------------------------------------
# Path configuration
# ---------------------------------------------------------------------------
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# django-environ reads from .env file or OS environment
env = environ.Env(
    DEBUG=(bool, False),
)

environ.Env.read_env(BASE_DIR / ".env")

# ---------------------------------------------------------------------------
# Security
# ---------------------------------------------------------------------------
SECRET_KEY = env("SECRET_KEY", default="gridwalk-insecure-local-key")
DEBUG = env("DEBUG")
ALLOWED_HOSTS: list[str] = []

# ---------------------------------------------------------------------------
# Application definition
# ---------------------------------------------------------------------------
DJANGO_APPS = [
    "django.contrib.contenttypes",
]

LOCAL_APPS = [
    "apps.grid",
    "apps.wordtree",
    "apps.workload",
    "apps.protocol",
    "apps.engine",
    "apps.metrics",
    "apps.experiments",
]

INSTALLED_APPS = DJANGO_APPS + LOCAL_APPS

# ---------------------------------------------------------------------------
# Database
# ---------------------------------------------------------------------------
# SQLite by default; point DATABASE_URL at PostgreSQL for shared sweep archives.
DATABASES = {
    "default": env.db("DATABASE_URL", default=f"sqlite:///{BASE_DIR / 'gridwalk.sqlite3'}"),
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# ---------------------------------------------------------------------------
# Internationalization & Timezone
# ---------------------------------------------------------------------------
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

# ---------------------------------------------------------------------------
# Celery
# ---------------------------------------------------------------------------
CELERY_BROKER_URL = env("REDIS_URL", default="redis://localhost:6379/0")
CELERY_RESULT_BACKEND = env("REDIS_URL", default="redis://localhost:6379/0")
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_TIMEZONE = "UTC"

# Sweep cells are CPU-bound; keep them off the default queue so workers can be sized separately
CELERY_TASK_QUEUES = {
    "default": {},
    "sweeps": {},
}
CELERY_TASK_DEFAULT_QUEUE = "default"
# One long cell per worker process at a time
CELERY_WORKER_PREFETCH_MULTIPLIER = 1
CELERY_TASK_ROUTES = {
    "experiments.run_cell": {"queue": "sweeps"},
}

# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(levelname)s %(asctime)s %(name)s %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        "apps": {"handlers": ["console"], "level": env("GRIDWALK_LOG_LEVEL", default="INFO"), "propagate": False},
        "core": {"handlers": ["console"], "level": "WARNING", "propagate": False},
    },
}

# ---------------------------------------------------------------------------
# Gridwalk simulation defaults (override per run with command flags)
# ---------------------------------------------------------------------------
GRIDWALK = {
    # Refresh coefficient c_r in b = min(nbT / n * c_r, m_r)
    "REFRESH_COEFFICIENT": 1000.0,
    # Minimum refresh value m_r (caps b)
    "MIN_REFRESH": 1500.0,
    # Feedback timeout in time units; None means 2 * n
    "FEEDBACK_TIMEOUT": None,
    # Time per token hop and per message hop
    "HOP_COST": 1.0,
    # Log-normal task lengths: mean and std of ln(length)
    "TASK_MU": math.log(100.0),
    "TASK_SIGMA": 0.5,
    # ring | complete | path | random:<p> | file:<path>
    "TOPOLOGY": "random:0.1",
    # Master seed fallback when --seed is omitted
    "SEED": env.int("GRIDWALK_SEED", default=1),
    # Extra time after a claim's expected end before an idle node may re-claim it; None disables reclaim
    "CLAIM_GRACE": None,
    # Keep simulating after the workload completes to measure t_propagate
    "TRACK_PROPAGATION": True,
    # Safety cap on simulated time; None derives t_sequential + 100 * n
    "MAX_TIME": None,
}
