"""
Experiment service layer.

Runs sweep cells (inline or on Celery workers), reads and writes the metrics CSV,
persists runs, and compares two methods configuration by configuration.

Rows are always sorted by (method, n, tasks, c_r, m_r, seed) before they are
written, so the CSV bytes do not depend on the order cells finished in.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass
from typing import IO, Any, Iterable

from apps.engine.simulator import RunResult, Simulator
from apps.experiments.models import ExperimentRun
from apps.experiments.sweeps import Cell
from apps.metrics.metrics import CSV_COLUMNS, Metrics, Summary, summarize
from apps.protocol.messages import Method
from core.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

BACKENDS = ("inline", "celery")

METHOD_ORDER = {m.value: i for i, m in enumerate(Method)}


# ---------------------------------------------------------------------------
# Running cells
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellOutcome:
    """Metrics and trace hash of one finished cell."""

    metrics: Metrics
    trace_hash: str

    def to_dict(self) -> dict[str, Any]:
        return {"metrics": asdict(self.metrics), "trace_hash": self.trace_hash}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CellOutcome":
        return cls(metrics=Metrics(**data["metrics"]), trace_hash=data["trace_hash"])

    @property
    def sort_key(self) -> tuple:
        m = self.metrics
        return METHOD_ORDER.get(m.method, len(METHOD_ORDER)), m.n, m.tasks, m.c_r, m.m_r, m.seed


def execute(cell: Cell, trace_stream: IO[str] | None = None, keep_views: bool = False) -> RunResult:
    """Run one cell in this process."""
    return Simulator(cell.to_config(), trace_stream=trace_stream, keep_views=keep_views).run()


def run_cell(cell_data: dict[str, Any]) -> dict[str, Any]:
    """
    Run one cell given as a plain dict and return a JSON-safe outcome.

    This is the unit of work shipped to Celery workers.
    """
    result = execute(Cell.from_dict(cell_data))
    return CellOutcome(Metrics.from_run(result), result.trace_hash).to_dict()


def run_cells(cells: Iterable[Cell], backend: str = "inline") -> list[CellOutcome]:
    """
    Run every cell and return the outcomes sorted by configuration.

    Args:
        cells: Cells to run.
        backend: "inline" runs them one after the other here; "celery" fans them out
            as a group of experiments.run_cell tasks and waits for all of them.

    Raises:
        InvalidParameterError: On an unknown backend.
    """
    if backend not in BACKENDS:
        raise InvalidParameterError(f"Unknown backend '{backend}' (choose from {', '.join(BACKENDS)}).")

    payloads = [cell.to_dict() for cell in cells]
    logger.info("Running %d cells on the %s backend", len(payloads), backend)

    if backend == "celery":
        from celery import group

        from apps.experiments.tasks import run_cell_task

        raw = group(run_cell_task.s(p) for p in payloads)().get()
    else:
        raw = []
        for index, payload in enumerate(payloads, start=1):
            raw.append(run_cell(payload))
            logger.debug("Cell %d/%d done", index, len(payloads))

    outcomes = sorted((CellOutcome.from_dict(r) for r in raw), key=lambda o: o.sort_key)
    incomplete = sum(1 for o in outcomes if not o.metrics.complete)
    if incomplete:
        logger.warning("%d of %d runs hit max_time before completing", incomplete, len(outcomes))
    return outcomes


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_csv(stream: IO[str], outcomes: Iterable[CellOutcome]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for outcome in outcomes:
        writer.writerow(outcome.metrics.csv_row())


def read_csv(stream: IO[str]) -> list[Metrics]:
    """
    Parse a metrics CSV.

    Raises:
        InvalidParameterError: On a wrong header or a malformed row; the message names
            the 1-based line.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header != CSV_COLUMNS:
        raise InvalidParameterError(f"line 1: expected header {','.join(CSV_COLUMNS)}")

    runs = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise InvalidParameterError(
                f"line {reader.line_num}: expected {len(CSV_COLUMNS)} fields, got {len(row)}"
            )
        try:
            runs.append(Metrics.from_csv_row(dict(zip(CSV_COLUMNS, row))))
        except InvalidParameterError as exc:
            raise InvalidParameterError(f"line {reader.line_num}: {exc}") from None
    return runs


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_runs(outcomes: Iterable[CellOutcome], label: str = "") -> list[ExperimentRun]:
    rows = ExperimentRun.objects.bulk_create(
        [ExperimentRun.from_metrics(o.metrics, o.trace_hash, label=label) for o in outcomes]
    )
    logger.info("Saved %d runs (label=%r)", len(rows), label)
    return rows


def load_runs(label: str | None = None) -> list[Metrics]:
    qs = ExperimentRun.objects.all()
    if label is not None:
        qs = qs.filter(label=label)
    return [run.to_metrics() for run in qs]


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    """
    Candidate versus baseline on one (n, tasks, c_r, m_r) configuration.

    Attributes:
        efficiency_delta: Mean efficiency of the candidate minus the baseline's, in points.
        message_ratio: Mean total messages (token hops included), candidate / baseline.
        replication_ratio: Mean replicated tasks, candidate / baseline.
    """

    n: int
    tasks: int
    c_r: float
    m_r: float
    baseline: Summary
    candidate: Summary
    efficiency_delta: float
    message_ratio: float
    replication_ratio: float


def _ratio(candidate: float, baseline: float) -> float:
    if baseline == 0:
        return 1.0 if candidate == 0 else math.inf
    return candidate / baseline


def _total_messages(summary: Summary) -> float:
    return sum(summary.mean[c] for c in ("msg_token", "msg_down", "msg_feedback", "msg_final"))


def compare(runs: Iterable[Metrics], baseline: str = "active", candidate: str = "dm") -> list[Comparison]:
    """
    Compare two methods on every configuration the candidate was run on.

    Raises:
        InvalidParameterError: When the candidate has no runs, or a candidate
            configuration has no baseline runs ("missing baseline").
    """
    baseline = Method.parse(baseline).value
    candidate = Method.parse(candidate).value
    by_method: dict[str, dict[tuple, Summary]] = {}
    for summary in summarize(runs):
        by_method.setdefault(summary.method, {})[summary.key[1:]] = summary

    candidates = by_method.get(candidate)
    if not candidates:
        raise InvalidParameterError(f"missing candidate: no '{candidate}' runs to compare")
    baselines = by_method.get(baseline, {})

    comparisons = []
    for key, cand in sorted(candidates.items()):
        base = baselines.get(key)
        if base is None:
            n, tasks, c_r, m_r = key
            raise InvalidParameterError(
                f"missing baseline: no '{baseline}' runs for n={n} tasks={tasks} c_r={c_r:g} m_r={m_r:g}"
            )
        comparisons.append(
            Comparison(
                *key,
                baseline=base,
                candidate=cand,
                efficiency_delta=cand.mean["efficiency_pct"] - base.mean["efficiency_pct"],
                message_ratio=_ratio(_total_messages(cand), _total_messages(base)),
                replication_ratio=_ratio(cand.mean["replicated"], base.mean["replicated"]),
            )
        )
    return comparisons


def format_comparisons(comparisons: list[Comparison]) -> str:
    lines = [f"{'n':>6} {'tasks':>7} {'c_r':>8} {'m_r':>8} {'d_eff':>8} {'msg_ratio':>10} {'repl_ratio':>10}"]
    for c in comparisons:
        lines.append(
            f"{c.n:>6} {c.tasks:>7} {c.c_r:>8g} {c.m_r:>8g} "
            f"{c.efficiency_delta:>8.3f} {c.message_ratio:>10.3f} {c.replication_ratio:>10.3f}"
        )
    return "\n".join(lines) + "\n"


def format_summaries(summaries: list[Summary]) -> str:
    lines = []
    for s in summaries:
        lines.append(
            f"{s.method} n={s.n} tasks={s.tasks} c_r={s.c_r:g} m_r={s.m_r:g} runs={s.runs}: "
            f"efficiency {s.mean['efficiency_pct']:.2f}% (std {s.std['efficiency_pct']:.2f}), "
            f"messages {_total_messages(s):.1f}, "
            f"replicated {s.mean['replicated']:.2f}"
        )
    return "\n".join(lines) + "\n"
