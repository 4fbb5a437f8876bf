"""
Experiment definitions.

An ExperimentSpec is the cross product methods x node counts x task counts x
repetitions. Repetition r of every cell uses seed base_seed + r, so two methods
compared on the same (n, tasks, r) share the topology, the task lengths and the
token's starting conditions.

Values come from three places, highest priority first: command-line flags, the
experiment file given with --config, settings.GRIDWALK.

Experiment file (django-environ .env grammar):
    methods=active,dm
    nodes=100
    tasks=100:1000:100
    reps=5
    cr=1000
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import environ
from django.conf import settings

from apps.engine.config import SimConfig
from apps.experiments.options import FILE_PARSERS
from apps.protocol.messages import Method
from core.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cell:
    """
    One run of a sweep. Plain values only, so it travels as JSON to Celery workers.
    """

    method: str
    n: int
    tasks: int
    seed: int
    c_r: float | None = None
    m_r: float | None = None
    timeout: float | None = None
    topology: str | None = None
    mu: float | None = None
    sigma: float | None = None
    crashes: tuple[tuple[float, int], ...] = ()
    max_time: float | None = None
    claim_grace: float | None = None
    track_propagation: bool | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Cell":
        values = dict(data)
        values["crashes"] = tuple((float(t), int(node)) for t, node in values.get("crashes", ()))
        return cls(**values)

    def to_config(self) -> SimConfig:
        """Resolve the cell against settings.GRIDWALK."""
        return SimConfig.from_settings(
            self.n,
            self.tasks,
            self.method,
            c_r=self.c_r,
            m_r=self.m_r,
            timeout_feedback=self.timeout,
            seed=self.seed,
            topology=self.topology,
            mu=self.mu,
            sigma=self.sigma,
            crashes=self.crashes,
            max_time=self.max_time,
            claim_grace=self.claim_grace,
            track_propagation=self.track_propagation,
        )


@dataclass(frozen=True)
class ExperimentSpec:
    """
    A set of runs to execute.

    Attributes:
        methods: Methods to run, in the given order.
        nodes: Node counts.
        tasks: Task counts.
        reps: Repetitions per (method, n, tasks).
        seed: Base seed.
        out: CSV destination; None writes to stdout.
        Everything else is forwarded to each Cell; None means the settings default.
    """

    methods: tuple[Method, ...]
    nodes: tuple[int, ...]
    tasks: tuple[int, ...]
    reps: int = 1
    seed: int = 1
    c_r: float | None = None
    m_r: float | None = None
    timeout: float | None = None
    topology: str | None = None
    mu: float | None = None
    sigma: float | None = None
    crashes: tuple[tuple[float, int], ...] = ()
    max_time: float | None = None
    claim_grace: float | None = None
    track_propagation: bool | None = None
    out: Path | None = None
    label: str = ""

    def __post_init__(self):
        if not self.methods or not self.nodes or not self.tasks:
            raise InvalidParameterError("An experiment needs at least one method, node count and task count.")
        if self.reps < 1:
            raise InvalidParameterError(f"Repetitions must be >= 1, got {self.reps}.")
        if min(self.nodes) < 1 or min(self.tasks) < 1:
            raise InvalidParameterError("Node and task counts must be positive.")

    def __len__(self) -> int:
        return len(self.methods) * len(self.nodes) * len(self.tasks) * self.reps

    def cells(self) -> list[Cell]:
        """Every run of the experiment, methods outermost, repetitions innermost."""
        return [
            Cell(
                method=method.value,
                n=n,
                tasks=tasks,
                seed=self.seed + rep,
                c_r=self.c_r,
                m_r=self.m_r,
                timeout=self.timeout,
                topology=self.topology,
                mu=self.mu,
                sigma=self.sigma,
                crashes=self.crashes,
                max_time=self.max_time,
                claim_grace=self.claim_grace,
                track_propagation=self.track_propagation,
            )
            for method in self.methods
            for n in self.nodes
            for tasks in self.tasks
            for rep in range(self.reps)
        ]

    @classmethod
    def from_options(cls, options: dict[str, Any]) -> "ExperimentSpec":
        """
        Build a spec from management-command options, merged over the --config file.

        Raises:
            InvalidParameterError: On a bad config file, or when nodes or tasks are missing.
        """
        file_values = read_config_file(options["config"]) if options.get("config") else {}

        def pick(key: str) -> Any:
            value = options.get(key)
            return value if value is not None else file_values.get(key)

        if pick("methods") is not None:
            methods = pick("methods")
        elif pick("method") is not None:
            methods = [pick("method")]
        else:
            methods = [Method.DM]

        nodes, tasks = pick("nodes"), pick("tasks")
        if nodes is None or tasks is None:
            raise InvalidParameterError("--nodes and --tasks are required (as flags or in the config file).")

        seed = pick("seed")
        out = pick("out")
        return cls(
            methods=tuple(methods),
            nodes=tuple(nodes),
            tasks=tuple(tasks),
            reps=pick("reps") or 1,
            seed=seed if seed is not None else settings.GRIDWALK["SEED"],
            c_r=pick("cr"),
            m_r=pick("mr"),
            timeout=pick("timeout"),
            topology=pick("topology"),
            mu=pick("mu"),
            sigma=pick("sigma"),
            crashes=tuple(pick("crash") or ()),
            max_time=pick("max_time"),
            claim_grace=pick("claim_grace"),
            track_propagation=False if pick("no_propagation") else None,
            out=Path(out) if out else None,
            label=pick("label") or "",
        )


def read_config_file(path: str | Path) -> dict[str, Any]:
    """
    Parse an experiment file into option values.

    The file is read into a private environ.Env subclass, so os.environ is neither
    read nor modified.

    Raises:
        InvalidParameterError: If the file is missing, or on an unknown key or bad value.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidParameterError(f"Config file not found: {path}")

    file_env = type("ExperimentFileEnv", (environ.Env,), {"ENVIRON": {}})
    file_env.read_env(path, overwrite=True)

    values: dict[str, Any] = {}
    reader = file_env()
    for key in sorted(file_env.ENVIRON):
        name = key.lower().replace("-", "_")
        parser = FILE_PARSERS.get(name)
        if parser is None:
            raise InvalidParameterError(f"{path}: unknown key '{key}'.")
        try:
            values[name] = parser(reader.str(key))
        except ValueError as exc:
            raise InvalidParameterError(f"{path}: {key}: {exc}") from None
    logger.debug("Read %d keys from %s", len(values), path)
    return values
