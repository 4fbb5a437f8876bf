"""Local development settings for Gridwalk."""

from .base import *  # noqa: F401, F403

DEBUG = True

# Run sweep cells in-process when no broker is around
CELERY_TASK_ALWAYS_EAGER = env.bool("CELERY_TASK_ALWAYS_EAGER", default=False)  # noqa: F405
