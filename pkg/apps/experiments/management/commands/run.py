"""
Run simulations and emit one CSV row per (method, n, tasks, repetition).

Usage:
    python manage.py run --method dm --nodes 100 --tasks 500 --seed 1
    python manage.py run --method active --nodes 100 --tasks 100:1000:100 --reps 5 --out active.csv
    python manage.py run --method dm --nodes 20 --tasks 50 --trace run.trace --dump-tree tree.txt
    python manage.py run --config desk.env --cr 100 --save --label high-frequency

The CSV goes to --out, or to stdout when --out is omitted. The per-configuration
summary and the trace hashes go to stdout when --out is given, otherwise to stderr
so that stdout stays a clean CSV.
"""

import io
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.experiments.options import add_experiment_arguments
from apps.experiments.services import (
    CellOutcome,
    execute,
    format_summaries,
    run_cells,
    save_runs,
    write_csv,
)
from apps.experiments.sweeps import ExperimentSpec
from apps.metrics.metrics import Metrics, summarize
from apps.protocol.messages import Method
from core.exceptions import GridwalkError

SINGLE_RUN_OPTIONS = ("trace", "dump_views", "dump_tree")


class Command(BaseCommand):
    help = "Run task-management simulations and write their metrics as CSV"

    def add_arguments(self, parser):
        parser.add_argument("--method", type=Method.parse, help="active | ds | df | dm (default dm)")
        add_experiment_arguments(parser)
        parser.add_argument("--trace", help="Write the event trace of a single run to this file")
        parser.add_argument("--dump-views", help="Write each node's final task view as CSV into this directory")
        parser.add_argument("--dump-tree", help="Write the last diffusion tree of a single run to this file")

    def handle(self, *args, **options):
        try:
            spec = ExperimentSpec.from_options(options)
            outcomes = self.run_experiment(spec, options)
            self.report(spec, outcomes, options)
        except GridwalkError as exc:
            raise CommandError(str(exc)) from exc
        except OSError as exc:
            raise CommandError(f"{exc.filename}: {exc.strerror}") from exc

    def run_experiment(self, spec: ExperimentSpec, options) -> list[CellOutcome]:
        if any(options.get(name) for name in SINGLE_RUN_OPTIONS):
            if len(spec) != 1:
                raise CommandError("--trace, --dump-views and --dump-tree need exactly one run.")
            return [self._run_single(spec, options)]
        return run_cells(spec.cells(), backend="inline")

    # ------------------------------------------------------------------
    def _run_single(self, spec: ExperimentSpec, options) -> CellOutcome:
        (cell,) = spec.cells()
        keep_views = bool(options.get("dump_views"))
        if options.get("trace"):
            with open(options["trace"], "w", encoding="utf-8", newline="\n") as trace:
                result = execute(cell, trace_stream=trace, keep_views=keep_views)
        else:
            result = execute(cell, keep_views=keep_views)

        if keep_views:
            directory = Path(options["dump_views"])
            directory.mkdir(parents=True, exist_ok=True)
            for node, view in sorted(result.views.items()):
                with open(directory / f"node-{node}.csv", "w", encoding="utf-8", newline="") as fh:
                    view.write_csv(fh)
        if options.get("dump_tree"):
            if result.last_tree is None:
                self.stderr.write(self.style.WARNING("No diffusion was launched; the tree file is empty."))
            text = result.last_tree.to_text() if result.last_tree is not None else ""
            Path(options["dump_tree"]).write_text(text, encoding="utf-8")

        return CellOutcome(Metrics.from_run(result), result.trace_hash)

    def report(self, spec: ExperimentSpec, outcomes: list[CellOutcome], options) -> None:
        buffer = io.StringIO()
        write_csv(buffer, outcomes)
        if spec.out is not None:
            spec.out.write_text(buffer.getvalue(), encoding="utf-8")
            console = self.stdout
        else:
            self.stdout.write(buffer.getvalue(), ending="")
            console = self.stderr

        console.write(format_summaries(summarize(o.metrics for o in outcomes)), ending="")
        for o in outcomes:
            m = o.metrics
            console.write(f"trace {m.method} n={m.n} tasks={m.tasks} seed={m.seed} sha256={o.trace_hash}")

        if options.get("save"):
            rows = save_runs(outcomes, label=spec.label)
            console.write(self.style.SUCCESS(f"Saved {len(rows)} runs."))
        if spec.out is not None:
            console.write(self.style.SUCCESS(f"Wrote {len(outcomes)} rows to {spec.out}"))
