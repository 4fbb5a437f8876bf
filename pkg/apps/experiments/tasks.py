"""
Celery tasks for experiment sweeps.

Tasks:
  run_cell  runs one (method, n, tasks, seed) cell and returns its metrics and
              trace hash as JSON. Routed to the sweeps queue (see settings/base.py).

Cells are pure functions of their payload, so a retried or duplicated task yields
the same result.
"""

import logging

from celery import shared_task

logger = logging.getLogger(__name__)


@shared_task(name="experiments.run_cell")
def run_cell_task(cell: dict) -> dict:
    """
    Run one sweep cell.

    Returns:
        Dict with "metrics" (Metrics fields) and "trace_hash".
    """
    from apps.experiments.services import run_cell

    outcome = run_cell(cell)
    logger.debug(
        "Cell %s n=%s tasks=%s seed=%s done", cell["method"], cell["n"], cell["tasks"], cell["seed"]
    )
    return outcome
