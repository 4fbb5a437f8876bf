"""
Celery application for Gridwalk sweeps.

Workers pick up experiments.run_cell tasks from the "sweeps" queue:

    celery -A gridwalk worker -l info -Q sweeps

Anything else lands on "default". Broker and result backend both come from REDIS_URL.
"""

import os

from celery import Celery

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "gridwalk.settings.local")

app = Celery("gridwalk")

# CELERY_* names in Django settings configure the app
app.config_from_object("django.conf:settings", namespace="CELERY")

# Picks up apps/<app>/tasks.py
app.autodiscover_tasks()
