"""
Token and message types exchanged between nodes.

These are the simulator's wire model. The engine wraps every message in an
Envelope (src, dst, msg) when it puts one in flight; the payload types themselves
only carry what a receiving node is allowed to read.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar

from apps.wordtree.wordtree import CirculatingWord, SpanTree
from apps.workload.taskset import TaskStateSet
from core.exceptions import InvalidParameterError

NodeId = int
TokenId = int
DiffusionKey = tuple[TokenId, int]


class Method(str, Enum):
    """Task management methods."""

    ACTIVE = "active"
    DS = "ds"  # simple diffusion
    DF = "df"  # diffusion with feedback
    DM = "dm"  # diffusion with feedback, then a final diffusion of the merged set

    @property
    def diffuses(self) -> bool:
        return self is not Method.ACTIVE

    @property
    def collects_feedback(self) -> bool:
        return self in (Method.DF, Method.DM)

    @classmethod
    def parse(cls, value: str) -> "Method":
        try:
            return cls(value.lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise InvalidParameterError(f"Unknown method '{value}' (choose from {choices}).") from None


class Phase(str, Enum):
    DOWN = "down"
    FINAL_DOWN = "final"


@dataclass(frozen=True)
class MethodConfig:
    """
    Method parameters.

    Attributes:
        method: Which task management method the nodes run.
        c_r: Refresh coefficient of the diffusion bound.
        m_r: Cap of the diffusion bound (minimum refresh value).
        timeout_feedback: Time a node waits for its sons; None means 2 * n.
    """

    method: Method
    c_r: float = 1000.0
    m_r: float = 1500.0
    timeout_feedback: float | None = None

    def __post_init__(self):
        if self.c_r <= 0 or self.m_r <= 0:
            raise InvalidParameterError(f"c_r and m_r must be positive, got c_r={self.c_r}, m_r={self.m_r}.")
        if self.timeout_feedback is not None and self.timeout_feedback <= 0:
            raise InvalidParameterError(f"Feedback timeout must be positive, got {self.timeout_feedback}.")

    def timeout_for(self, n: int) -> float:
        return self.timeout_feedback if self.timeout_feedback is not None else 2.0 * n


@dataclass
class Token:
    """
    The single circulating token.

    Attributes:
        id: Token id, checked by receivers of diffusion messages.
        tasks: The token's task-state set.
        word: Visit history, reduced.
        hops: Hops since the last diffusion launch (C_T).
        diffusions: Diffusions launched so far (D_T); the next diff_id.
    """

    id: TokenId
    tasks: TaskStateSet
    word: CirculatingWord
    hops: int = 0
    diffusions: int = 0


@dataclass(frozen=True)
class DiffusionMsg:
    """Down or FinalDown message; `tree` is rooted at the receiver."""

    token_id: TokenId
    diff_id: int
    phase: Phase
    tasks: TaskStateSet = field(repr=False)
    tree: SpanTree = field(repr=False)

    @property
    def key(self) -> DiffusionKey:
        return self.token_id, self.diff_id

    @property
    def kind(self) -> str:
        return self.phase.value


@dataclass(frozen=True)
class FeedbackMsg:
    token_id: TokenId
    diff_id: int
    tasks: TaskStateSet = field(repr=False)

    kind: ClassVar[str] = "feedback"

    @property
    def key(self) -> DiffusionKey:
        return self.token_id, self.diff_id


Message = DiffusionMsg | FeedbackMsg
