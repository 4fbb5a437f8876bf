"""
Evaluation metrics computed from run results.

    efficiency = t_sequential / (t_distributed * n) * 100

t_sequential is the sum of task lengths (what one node would need alone), so a
perfect speedup gives 100%. Message classes are kept apart so token hops can be
included in or excluded from any total.

CSV row per run:
    method,n,tasks,seed,c_r,m_r,t_dist,efficiency_pct,msg_token,msg_down,msg_feedback,msg_final,replicated,t_propagate
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np
from django.conf import settings

from apps.engine.simulator import RunResult
from apps.engine.trace import parse_line
from core.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "method", "n", "tasks", "seed", "c_r", "m_r", "t_dist", "efficiency_pct",
    "msg_token", "msg_down", "msg_feedback", "msg_final", "replicated", "t_propagate",
]
NUMERIC_COLUMNS = CSV_COLUMNS[6:]


def efficiency(t_seq: float, t_dist: float, n: int) -> float:
    """
    Percentage of perfect speedup.

    Raises:
        InvalidParameterError: If t_dist <= 0 or n < 1.
    """
    if t_dist <= 0:
        raise InvalidParameterError(f"Distributed time must be positive, got {t_dist}.")
    if n < 1:
        raise InvalidParameterError(f"Node count must be positive, got {n}.")
    return t_seq / (t_dist * n) * 100.0


def count_replicated(source: RunResult | Iterable[str], until: float | None = None) -> int:
    """
    Sum over tasks of (completions - 1).

    Args:
        source: A RunResult, or trace lines (replayed from their "done" events).
        until: With trace lines, ignore events after this time (use t_distributed to
            match the RunResult's frozen counters).
    """
    if isinstance(source, RunResult):
        return sum(count - 1 for count in source.completions.values())

    done: Counter = Counter()
    for line in source:
        if not line or line.startswith("time\t"):
            continue
        time, kind, _, task_id, _, _ = parse_line(line)
        if kind == "done" and (until is None or time <= until):
            done[task_id] += 1
    return sum(count - 1 for count in done.values())


@dataclass(frozen=True)
class Metrics:
    """Evaluation quantities of one run."""

    method: str
    n: int
    tasks: int
    seed: int
    c_r: float
    m_r: float
    t_sequential: float
    t_distributed: float
    efficiency_pct: float
    msg_token: int
    msg_down: int
    msg_feedback: int
    msg_final: int
    msg_dropped: int
    replicated: int
    t_propagate: float | None
    complete: bool = True

    @classmethod
    def from_run(cls, result: RunResult) -> "Metrics":
        cfg = result.config
        return cls(
            method=cfg.method.method.value,
            n=cfg.n,
            tasks=cfg.tasks,
            seed=cfg.seed,
            c_r=cfg.method.c_r,
            m_r=cfg.method.m_r,
            t_sequential=result.t_sequential,
            t_distributed=result.t_distributed,
            efficiency_pct=efficiency(result.t_sequential, result.t_distributed, cfg.n),
            msg_token=result.messages.token_hops,
            msg_down=result.messages.down,
            msg_feedback=result.messages.feedback,
            msg_final=result.messages.final_down,
            msg_dropped=result.messages.dropped,
            replicated=count_replicated(result),
            t_propagate=result.t_propagate,
            complete=result.complete,
        )

    @property
    def messages(self) -> int:
        """All diffusion messages plus token hops."""
        return self.msg_token + self.msg_down + self.msg_feedback + self.msg_final

    def csv_row(self) -> list[str]:
        return [
            self.method,
            str(self.n),
            str(self.tasks),
            str(self.seed),
            f"{self.c_r:.6f}",
            f"{self.m_r:.6f}",
            f"{self.t_distributed:.6f}",
            f"{self.efficiency_pct:.6f}",
            str(self.msg_token),
            str(self.msg_down),
            str(self.msg_feedback),
            str(self.msg_final),
            str(self.replicated),
            "" if self.t_propagate is None else f"{self.t_propagate:.6f}",
        ]

    @classmethod
    def from_csv_row(cls, row: dict[str, str]) -> "Metrics":
        """
        Rebuild metrics from a CSV row (t_sequential is recovered from the efficiency).

        The CSV has no completion column. A row whose t_dist equals the default cap
        t_sequential + 100 * n * HOP_COST is read as incomplete and logged; runs capped
        by an explicit --max-time cannot be told apart from complete ones.

        Raises:
            InvalidParameterError: On a missing or non-numeric field.
        """
        try:
            n = int(row["n"])
            t_dist = float(row["t_dist"])
            eff = float(row["efficiency_pct"])
            metrics = cls(
                method=row["method"],
                n=n,
                tasks=int(row["tasks"]),
                seed=int(row["seed"]),
                c_r=float(row["c_r"]),
                m_r=float(row["m_r"]),
                t_sequential=eff / 100.0 * t_dist * n,
                t_distributed=t_dist,
                efficiency_pct=eff,
                msg_token=int(row["msg_token"]),
                msg_down=int(row["msg_down"]),
                msg_feedback=int(row["msg_feedback"]),
                msg_final=int(row["msg_final"]),
                msg_dropped=0,
                replicated=int(row["replicated"]),
                t_propagate=float(row["t_propagate"]) if row["t_propagate"] else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameterError(f"bad field: {exc}") from None

        cap = metrics.t_sequential + 100.0 * n * settings.GRIDWALK["HOP_COST"]
        if math.isclose(t_dist, cap, rel_tol=1e-6):
            logger.warning(
                "Row %s n=%d tasks=%d seed=%d stopped at the default max_time; its efficiency is a lower bound",
                metrics.method, n, metrics.tasks, metrics.seed,
            )
            metrics = replace(metrics, complete=False)
        return metrics


@dataclass(frozen=True)
class Summary:
    """Mean and population std of each numeric column over one configuration's runs."""

    method: str
    n: int
    tasks: int
    c_r: float
    m_r: float
    runs: int
    mean: dict[str, float]
    std: dict[str, float]

    @property
    def key(self) -> tuple:
        return self.method, self.n, self.tasks, self.c_r, self.m_r


def _column(m: Metrics, name: str) -> float:
    if name == "t_dist":
        return m.t_distributed
    if name == "t_propagate":
        return np.nan if m.t_propagate is None else m.t_propagate
    return float(getattr(m, name))


def summarize(runs: Iterable[Metrics]) -> list[Summary]:
    """
    Aggregate runs per (method, n, tasks, c_r, m_r).

    Values are sorted before reduction, so the output does not depend on input order.
    Runs without t_propagate are left out of that column's statistics.

    Raises:
        InvalidParameterError: On empty input.
    """
    groups: dict[tuple, list[Metrics]] = {}
    for m in runs:
        groups.setdefault((m.method, m.n, m.tasks, m.c_r, m.m_r), []).append(m)
    if not groups:
        raise InvalidParameterError("Cannot summarize an empty set of runs.")

    summaries = []
    for key in sorted(groups):
        members = groups[key]
        mean, std = {}, {}
        for name in NUMERIC_COLUMNS:
            values = np.sort(np.array([_column(m, name) for m in members], dtype=float))
            values = values[~np.isnan(values)]
            mean[name] = float(values.mean()) if values.size else float("nan")
            std[name] = float(values.std(ddof=0)) if values.size else float("nan")
        summaries.append(Summary(*key, runs=len(members), mean=mean, std=std))
    return summaries

