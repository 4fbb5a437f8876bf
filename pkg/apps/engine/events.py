"""
Simulation events and the time-ordered queue.

Events pop in (time, seq) order; seq is the insertion counter, so two events at the
same instant are handled in the order they were scheduled.
"""

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from apps.protocol.messages import Message, NodeId
from core.exceptions import ProtocolViolationError


class EventKind(str, Enum):
    TOKEN_ARRIVE = "token"
    TOKEN_RETRY = "retry"
    DELIVER = "deliver"
    TASK_DONE = "done"
    TIMEOUT = "timeout"
    CRASH = "crash"


@dataclass(frozen=True)
class Envelope:
    """A message in flight."""

    src: NodeId
    dst: NodeId
    msg: Message


@dataclass(frozen=True, order=True)
class SimEvent:
    time: float
    seq: int
    kind: EventKind = field(compare=False)
    node: NodeId = field(compare=False)
    # Envelope for DELIVER, task id for TASK_DONE, diffusion key for TIMEOUT, previous holder for TOKEN_ARRIVE
    payload: Any = field(default=None, compare=False)


class EventQueue:
    """Min-heap of SimEvent."""

    def __init__(self):
        self._heap: list[SimEvent] = []
        self._seq = itertools.count()
        self.now = 0.0

    def __len__(self) -> int:
        return len(self._heap)

    def __iter__(self):
        return iter(self._heap)

    def push(self, time: float, kind: EventKind, node: NodeId, payload: Any = None) -> SimEvent:
        if time < self.now:
            raise ProtocolViolationError(f"Cannot schedule {kind.value} at t={time} before now={self.now}.")
        event = SimEvent(time, next(self._seq), kind, node, payload)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> SimEvent:
        event = heapq.heappop(self._heap)
        self.now = event.time
        return event

    def peek_time(self) -> float:
        return self._heap[0].time
