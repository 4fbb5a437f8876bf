"""
Run configuration.

SimConfig is a frozen value: one simulated world. Defaults come from
settings.GRIDWALK through SimConfig.from_settings(); explicit keyword arguments win.
"""

import logging
from dataclasses import dataclass, field

from django.conf import settings

from apps.grid.topology import parse_topology_option
from apps.protocol.messages import Method, MethodConfig
from core.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

CrashPlan = tuple[tuple[float, int], ...]


@dataclass(frozen=True)
class SimConfig:
    """
    Parameters of a single simulation run.

    Attributes:
        n: Node count.
        tasks: Task count.
        method: Method parameters (method, c_r, m_r, feedback timeout).
        seed: Master seed; every random stream of the run derives from it.
        topology: ring | complete | path | random:<p> | file:<path>.
        mu, sigma: Log-normal task length parameters.
        hop_cost: Time per token hop and per message hop.
        crashes: (time, node) pairs.
        max_time: Simulated-time cap; None derives t_sequential + 100 * n * hop_cost.
        claim_grace: Enables stale-claim reclaim with this grace; None disables it.
        track_propagation: Keep running after completion to measure t_propagate.
    """

    n: int
    tasks: int
    method: MethodConfig
    seed: int = 1
    topology: str = "random:0.1"
    mu: float = 4.605170185988092
    sigma: float = 0.5
    hop_cost: float = 1.0
    crashes: CrashPlan = field(default=())
    max_time: float | None = None
    claim_grace: float | None = None
    track_propagation: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError(f"Node count must be positive, got {self.n}.")
        if self.tasks < 1:
            raise InvalidParameterError(f"Task count must be positive, got {self.tasks}.")
        if self.seed < 0:
            raise InvalidParameterError(f"Seed must be non-negative, got {self.seed}.")
        if self.sigma < 0:
            raise InvalidParameterError(f"Sigma must be non-negative, got {self.sigma}.")
        if self.hop_cost <= 0:
            raise InvalidParameterError(f"Hop cost must be positive, got {self.hop_cost}.")
        if self.claim_grace is not None and self.claim_grace < 0:
            raise InvalidParameterError(f"Claim grace must be non-negative, got {self.claim_grace}.")
        parse_topology_option(self.topology)
        self._validate_crashes()

    def _validate_crashes(self) -> None:
        for time, node in self.crashes:
            if time < 0:
                raise InvalidParameterError(f"Crash time must be non-negative, got {time}.")
            if not 0 <= node < self.n:
                raise InvalidParameterError(f"Crash targets unknown node {node} (n={self.n}).")
            if node == 0 and time == 0:
                raise InvalidParameterError("Node 0 holds the token at t=0 and cannot crash then.")
        if len({node for _, node in self.crashes}) >= self.n:
            raise InvalidParameterError("The crash plan kills every node.")

    @property
    def method_name(self) -> Method:
        return self.method.method

    @classmethod
    def from_settings(
        cls,
        n: int,
        tasks: int,
        method: Method | str,
        *,
        c_r: float | None = None,
        m_r: float | None = None,
        timeout_feedback: float | None = None,
        **overrides,
    ) -> "SimConfig":
        """Build a config from settings.GRIDWALK, applying explicit overrides (None means "use the default")."""
        defaults = settings.GRIDWALK
        method_cfg = MethodConfig(
            method=Method.parse(method) if isinstance(method, str) else method,
            c_r=c_r if c_r is not None else defaults["REFRESH_COEFFICIENT"],
            m_r=m_r if m_r is not None else defaults["MIN_REFRESH"],
            timeout_feedback=timeout_feedback if timeout_feedback is not None else defaults["FEEDBACK_TIMEOUT"],
        )
        values = {
            "seed": defaults["SEED"],
            "topology": defaults["TOPOLOGY"],
            "mu": defaults["TASK_MU"],
            "sigma": defaults["TASK_SIGMA"],
            "hop_cost": defaults["HOP_COST"],
            "max_time": defaults["MAX_TIME"],
            "claim_grace": defaults["CLAIM_GRACE"],
            "track_propagation": defaults["TRACK_PROPAGATION"],
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(n=n, tasks=tasks, method=method_cfg, **values)


def parse_crash(value: str) -> tuple[float, int]:
    """
    Parse a `t@node` crash option.

    Raises:
        InvalidParameterError: On anything else.
    """
    time, sep, node = value.partition("@")
    try:
        if not sep:
            raise ValueError
        return float(time), int(node)
    except ValueError:
        raise InvalidParameterError(f"Crash must look like TIME@NODE, got '{value}'.") from None
