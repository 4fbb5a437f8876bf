"""
Sweep several methods over node and task counts.

Usage:
    python manage.py sweep --methods active,dm --nodes 100 --tasks 100:1000:100 --reps 5 --out task-sweep.csv
    python manage.py sweep --config desk.env --backend celery --save --label desk

With --backend celery every cell becomes an experiments.run_cell task on the
sweeps queue; rows are sorted before writing, so the CSV is byte-identical to
the inline backend's.
"""

from apps.experiments.management.commands.run import Command as RunCommand
from apps.experiments.options import add_experiment_arguments, method_list
from apps.experiments.services import BACKENDS, CellOutcome, run_cells
from apps.experiments.sweeps import ExperimentSpec


class Command(RunCommand):
    help = "Run a parameter sweep over methods, node counts and task counts"

    def add_arguments(self, parser):
        parser.add_argument("--methods", type=method_list, help="Comma-separated methods (default dm)")
        add_experiment_arguments(parser)
        parser.add_argument("--backend", choices=BACKENDS, default="inline", help="Where cells run")

    def run_experiment(self, spec: ExperimentSpec, options) -> list[CellOutcome]:
        return run_cells(spec.cells(), backend=options["backend"])
