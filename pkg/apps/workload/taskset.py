"""
Task model and local task-state sets.

Every node keeps a TaskStateSet: its own view of every task's state. Views are merged
under the lattice UNCOMPUTED < IN_PROGRESS < COMPUTED, so information only ever moves
a task up. The same type is used for the node-local set, the token's set and the sets
carried by diffusion messages.

Storage is columnar (numpy arrays indexed by task id) because merges run on every
token hop and every diffusion message. Ids not known to a set hold the internal
ABSENT state, which sits below UNCOMPUTED, so "union of ids" and "per-task max" are
the same element-wise maximum.

Design notes:
  - Ties keep the destination entry. Two different COMPUTED results for one task are
    a replicated computation, counted in `divergences`, not an error.
  - IN_PROGRESS entries carry the claim (claimer, claimed_at); COMPUTED entries carry
    the result (computed_by, completed_at).
"""

import csv
import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import IO, Iterator

import numpy as np

from core.exceptions import InvalidParameterError, InvalidStateError

logger = logging.getLogger(__name__)

NodeId = int
TaskId = int

ABSENT = -1
NO_NODE = -1


class TaskState(IntEnum):
    """Task states, ordered as the merge lattice."""

    UNCOMPUTED = 0
    IN_PROGRESS = 1
    COMPUTED = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class TaskResult:
    """Who computed a task and when."""

    computed_by: NodeId
    completed_at: float


@dataclass(frozen=True)
class Task:
    """
    One entry of a task-state set: {id_T, id_E, p, s, r}.

    The parameters p are reduced to the computation length; the result r is present
    exactly when the state is COMPUTED.
    """

    id: TaskId
    emitter: NodeId
    length: float
    state: TaskState
    result: TaskResult | None = None
    claimer: NodeId | None = None
    claimed_at: float | None = None

    def __post_init__(self):
        if self.length <= 0:
            raise InvalidParameterError(f"Task {self.id} length must be positive, got {self.length}.")
        if (self.result is not None) != (self.state is TaskState.COMPUTED):
            raise InvalidParameterError(f"Task {self.id}: result must be present iff state is computed.")


CSV_HEADER = ["id", "emitter", "length", "state", "computed_by", "completed_at"]


class TaskStateSet:
    """
    Mapping task id -> Task, stored column-wise.

    Attributes:
        divergences: Number of merges that met two different COMPUTED results for one task.
    """

    __slots__ = ("_state", "_emitter", "_length", "_who", "_when", "divergences")

    def __init__(self, capacity: int = 0):
        self._state = np.full(capacity, ABSENT, dtype=np.int8)
        self._emitter = np.full(capacity, NO_NODE, dtype=np.int32)
        self._length = np.zeros(capacity, dtype=np.float64)
        # claimer/claimed_at while IN_PROGRESS, computed_by/completed_at once COMPUTED
        self._who = np.full(capacity, NO_NODE, dtype=np.int32)
        self._when = np.full(capacity, np.nan, dtype=np.float64)
        self.divergences = 0

    # ------------------------------------------------------------------
    # Mapping protocol
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return int(np.count_nonzero(self._state != ABSENT))

    def __contains__(self, task_id: object) -> bool:
        return isinstance(task_id, (int, np.integer)) and 0 <= task_id < self._state.size and (
            self._state[task_id] != ABSENT
        )

    def __iter__(self) -> Iterator[TaskId]:
        return iter(self.ids())

    def ids(self) -> list[TaskId]:
        return np.flatnonzero(self._state != ABSENT).tolist()

    def get(self, task_id: TaskId) -> Task:
        """
        Return the entry for task_id.

        Raises:
            InvalidParameterError: If the task is unknown to this set.
        """
        if task_id not in self:
            raise InvalidParameterError(f"Unknown task {task_id}.")
        state = TaskState(int(self._state[task_id]))
        who, when = int(self._who[task_id]), float(self._when[task_id])
        return Task(
            id=task_id,
            emitter=int(self._emitter[task_id]),
            length=float(self._length[task_id]),
            state=state,
            result=TaskResult(who, when) if state is TaskState.COMPUTED else None,
            claimer=who if state is TaskState.IN_PROGRESS else None,
            claimed_at=when if state is TaskState.IN_PROGRESS else None,
        )

    def state_of(self, task_id: TaskId) -> TaskState:
        return self.get(task_id).state

    def length_of(self, task_id: TaskId) -> float:
        return float(self._length[task_id])

    def add(self, task: Task) -> None:
        """Insert or replace one entry (used to build sets and to submit new tasks)."""
        self._grow(task.id + 1)
        i = task.id
        self._state[i] = int(task.state)
        self._emitter[i] = task.emitter
        self._length[i] = task.length
        if task.result is not None:
            self._who[i], self._when[i] = task.result.computed_by, task.result.completed_at
        elif task.claimer is not None:
            self._who[i], self._when[i] = task.claimer, task.claimed_at
        else:
            self._who[i], self._when[i] = NO_NODE, np.nan

    def copy(self) -> "TaskStateSet":
        """Independent copy; the divergence counter starts again at zero."""
        clone = TaskStateSet.__new__(TaskStateSet)
        clone._state = self._state.copy()
        clone._emitter = self._emitter.copy()
        clone._length = self._length.copy()
        clone._who = self._who.copy()
        clone._when = self._when.copy()
        clone.divergences = 0
        return clone

    def count(self, state: TaskState) -> int:
        return int(np.count_nonzero(self._state == int(state)))

    def all_computed(self) -> bool:
        known = self._state[self._state != ABSENT]
        return bool(known.size) and bool(np.all(known == TaskState.COMPUTED))

    def states(self) -> np.ndarray:
        """Read-only view of the state column (ABSENT for unknown ids)."""
        view = self._state.view()
        view.flags.writeable = False
        return view

    def same_view(self, other: "TaskStateSet") -> bool:
        """True when both sets hold the same states and the same results for every task."""
        size = max(self._state.size, other._state.size)
        a, b = self._padded(size), other._padded(size)
        if not np.array_equal(a._state, b._state):
            return False
        done = a._state == TaskState.COMPUTED
        return bool(np.array_equal(a._who[done], b._who[done]) and np.array_equal(a._when[done], b._when[done]))

    # ------------------------------------------------------------------
    # Lattice operations
    # ------------------------------------------------------------------

    def merge(self, src: "TaskStateSet") -> "TaskStateSet":
        """
        Merge src into this set in place and return self.

        Per task the greater state wins; ties keep this set's entry. Meeting two
        different COMPUTED results increments `divergences`.
        """
        size = src._state.size
        if size > self._state.size:
            self._grow(size)
        mine = self._state[:size]
        theirs = src._state

        both_done = (mine == TaskState.COMPUTED) & (theirs == TaskState.COMPUTED)
        if both_done.any():
            differ = (self._who[:size][both_done] != src._who[both_done]) | (
                self._when[:size][both_done] != src._when[both_done]
            )
            self.divergences += int(np.count_nonzero(differ))

        raise_mask = theirs > mine
        if raise_mask.any():
            idx = np.flatnonzero(raise_mask)
            new_ids = idx[mine[idx] == ABSENT]
            if new_ids.size:
                self._emitter[new_ids] = src._emitter[new_ids]
                self._length[new_ids] = src._length[new_ids]
            self._state[idx] = theirs[idx]
            self._who[idx] = src._who[idx]
            self._when[idx] = src._when[idx]
        return self

    def select_task(self, rng: np.random.Generator, node: NodeId = NO_NODE, now: float = 0.0) -> TaskId | None:
        """
        Claim a uniformly random UNCOMPUTED task and mark it IN_PROGRESS.

        Returns:
            The claimed task id, or None when no UNCOMPUTED entry exists.
        """
        candidates = np.flatnonzero(self._state == TaskState.UNCOMPUTED)
        if candidates.size == 0:
            return None
        task_id = int(candidates[rng.integers(candidates.size)])
        self._claim(task_id, node, now)
        return task_id

    def reclaim_task(self, rng: np.random.Generator, node: NodeId, now: float, grace: float) -> TaskId | None:
        """
        Re-claim an IN_PROGRESS task whose claim is stale.

        A claim made at `claimed_at` on a task of length L is stale once
        now > claimed_at + L + grace; with equal node speeds only a crashed claimer
        can leave one behind. The node's own claims are never picked.

        Returns:
            The re-claimed task id, or None when no stale claim exists.
        """
        stale = (
            (self._state == TaskState.IN_PROGRESS)
            & (self._who != node)
            & (self._when + self._length + grace < now)
        )
        candidates = np.flatnonzero(stale)
        if candidates.size == 0:
            return None
        task_id = int(candidates[rng.integers(candidates.size)])
        self._claim(task_id, node, now)
        logger.debug("Node %d re-claimed stale task %d at t=%.3f", node, task_id, now)
        return task_id

    def complete_task(self, task_id: TaskId, node: NodeId, now: float) -> "TaskStateSet":
        """
        Mark an IN_PROGRESS task COMPUTED with result {node, now}.

        Raises:
            InvalidStateError: If the entry is missing or not IN_PROGRESS.
        """
        if task_id not in self or self._state[task_id] != TaskState.IN_PROGRESS:
            state = "absent" if task_id not in self else TaskState(int(self._state[task_id])).label
            raise InvalidStateError(f"Task {task_id} cannot be completed from state {state}.")
        self._state[task_id] = TaskState.COMPUTED
        self._who[task_id] = node
        self._when[task_id] = now
        return self

    # ------------------------------------------------------------------
    # CSV
    # ------------------------------------------------------------------

    def write_csv(self, stream: IO[str]) -> None:
        """Write `id,emitter,length,state,computed_by,completed_at`, one row per known task."""
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for task_id in self.ids():
            task = self.get(task_id)
            writer.writerow([
                task.id,
                task.emitter,
                repr(task.length),
                task.state.label,
                task.result.computed_by if task.result else "",
                repr(task.result.completed_at) if task.result else "",
            ])

    @classmethod
    def read_csv(cls, stream: IO[str]) -> "TaskStateSet":
        """
        Read a set written by write_csv(). Claims are not part of the format.

        Raises:
            InvalidParameterError: On a malformed row (1-based line number in message).
        """
        reader = csv.reader(stream)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise InvalidParameterError(f"line 1: expected header {','.join(CSV_HEADER)}.")
        labels = {s.label: s for s in TaskState}
        tasks = cls()
        for lineno, row in enumerate(reader, start=2):
            try:
                task_id, emitter, length, state, who, when = row
                state = labels[state]
                tasks.add(Task(
                    id=int(task_id),
                    emitter=int(emitter),
                    length=float(length),
                    state=state,
                    result=TaskResult(int(who), float(when)) if state is TaskState.COMPUTED else None,
                ))
            except (ValueError, KeyError, InvalidParameterError) as exc:
                raise InvalidParameterError(f"line {lineno}: {exc}") from None
        return tasks

    # ------------------------------------------------------------------
    # Internals
    # ------------------------------------------------------------------

    def _claim(self, task_id: TaskId, node: NodeId, now: float) -> None:
        self._state[task_id] = TaskState.IN_PROGRESS
        self._who[task_id] = node
        self._when[task_id] = now

    def _grow(self, size: int) -> None:
        extra = size - self._state.size
        if extra <= 0:
            return
        self._state = np.concatenate([self._state, np.full(extra, ABSENT, dtype=np.int8)])
        self._emitter = np.concatenate([self._emitter, np.full(extra, NO_NODE, dtype=np.int32)])
        self._length = np.concatenate([self._length, np.zeros(extra)])
        self._who = np.concatenate([self._who, np.full(extra, NO_NODE, dtype=np.int32)])
        self._when = np.concatenate([self._when, np.full(extra, np.nan)])

    def _padded(self, size: int) -> "TaskStateSet":
        if self._state.size == size:
            return self
        clone = self.copy()
        clone._grow(size)
        return clone


def generate_tasks(count: int, emitter: NodeId, mu: float, sigma: float, seed: int) -> TaskStateSet:
    """
    Draw `count` UNCOMPUTED tasks with log-normal lengths.

    Args:
        count: Number of tasks; ids are 0..count-1.
        emitter: Node that submits them.
        mu: Mean of ln(length).
        sigma: Standard deviation of ln(length); 0 gives every task length exp(mu).
        seed: RNG seed.

    Raises:
        InvalidParameterError: On count < 1 or sigma < 0.
    """
    if count < 1:
        raise InvalidParameterError(f"Task count must be positive, got {count}.")
    if sigma < 0:
        raise InvalidParameterError(f"Sigma must be non-negative, got {sigma}.")

    rng = np.random.default_rng(seed)
    tasks = TaskStateSet(count)
    tasks._state[:] = TaskState.UNCOMPUTED
    tasks._emitter[:] = emitter
    tasks._length[:] = rng.lognormal(mu, sigma, count)
    return tasks
