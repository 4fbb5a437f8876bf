"""
Per-node state machines for the task management methods.

Every handler is synchronous and deterministic: it receives one node's state, the
incoming token/message/timer and the current time, mutates the node's state, and
returns an Outbox describing what to send and which timers to arm. The engine owns
time, delivery and failures; nothing here knows whether a destination is alive.

Method summary:
  active  Nodes only sync with the token when it visits.
  ds      Every time C_T passes the bound, the holder diffuses the token's set down
          the spanning tree extracted from the circulating word.
  df      As ds, and each node answers its father with its merged set once all of
          its sons answered (or its timeout fired).
  dm      As df, and the initiator re-diffuses the fully merged set down the same tree.

Design notes:
  - Down payloads accumulate: a node forwards E_M merged with its own view.
  - Records are keyed by (token id, diff_id), so overlapping diffusions never mix.
  - Closing logic is shared between "last son answered" and "timeout fired".
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from apps.protocol.messages import (
    DiffusionKey,
    DiffusionMsg,
    FeedbackMsg,
    Message,
    Method,
    MethodConfig,
    NodeId,
    Phase,
    Token,
    TokenId,
)
from apps.wordtree.wordtree import SpanTree
from apps.workload.taskset import TaskId, TaskState, TaskStateSet
from core.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------


@dataclass
class DiffusionRecord:
    """What a node remembers about one diffusion it is part of (Df and Dm only)."""

    father: NodeId | None
    pending_sons: set[NodeId]
    acc: TaskStateSet
    deadline: float
    method: Method
    tree: SpanTree

    @property
    def is_initiator(self) -> bool:
        return self.father is None


@dataclass
class NodeState:
    """
    One node's protocol state.

    Attributes:
        node: Node id.
        view: Local task-state set.
        rng: The node's private task-selection stream.
        token_ids: Token ids this node accepts diffusion messages for.
        records: Open diffusion records by (token id, diff_id).
        newest_diff: Highest diff_id seen per token.
        computing: Task currently being computed, if any.
    """

    node: NodeId
    view: TaskStateSet
    rng: np.random.Generator = field(repr=False)
    token_ids: frozenset[TokenId] = frozenset({0})
    records: dict[DiffusionKey, DiffusionRecord] = field(default_factory=dict)
    newest_diff: dict[TokenId, int] = field(default_factory=dict)
    computing: TaskId | None = None


@dataclass
class Outbox:
    """
    Side effects requested by a handler.

    Attributes:
        sends: (destination, message) pairs, in emission order.
        timers: (fire time, diffusion key) pairs for feedback timeouts.
        launched: Key of a diffusion this handler launched.
        closed: Key of a record this handler closed.
        final: True when the close sent a FinalDown wave.
        timed_out: True when the close was forced by a timeout.
        rejected: True when the message was dropped as invalid (unknown token id).
        stale: True when a Down arrived for an older diffusion and was only merged.
        late: True when a feedback arrived for a closed record and was only merged.
    """

    sends: list[tuple[NodeId, Message]] = field(default_factory=list)
    timers: list[tuple[float, DiffusionKey]] = field(default_factory=list)
    launched: DiffusionKey | None = None
    closed: DiffusionKey | None = None
    final: bool = False
    timed_out: bool = False
    rejected: bool = False
    stale: bool = False
    late: bool = False


# ---------------------------------------------------------------------------
# Bound
# ---------------------------------------------------------------------------


def compute_bound(nb_uncomputed: int, n: int, cfg: MethodConfig) -> float:
    """
    Diffusion bound b = min(nbT / n * c_r, m_r).

    Raises:
        InvalidParameterError: On n < 1 or a negative count.
    """
    if n < 1 or nb_uncomputed < 0:
        raise InvalidParameterError(f"Bound needs n >= 1 and nbT >= 0, got n={n}, nbT={nb_uncomputed}.")
    return min(nb_uncomputed / n * cfg.c_r, cfg.m_r)


# ---------------------------------------------------------------------------
# Token
# ---------------------------------------------------------------------------


def on_token_arrival(state: NodeState, token: Token, cfg: MethodConfig, n: int, now: float) -> Outbox:
    """
    Sync the node and the token, record the visit and launch a diffusion when due.

    The next hop is chosen by the engine, which alone knows which neighbours are alive.
    """
    state.view.merge(token.tasks)
    token.tasks.merge(state.view)
    token.hops += 1
    token.word.append_visit(state.node)

    out = Outbox()
    if not cfg.method.diffuses:
        return out

    bound = compute_bound(state.view.count(TaskState.UNCOMPUTED), n, cfg)
    if token.hops <= bound:
        return out

    token.hops = 0
    diff_id = token.diffusions
    token.diffusions += 1
    tree = token.word.extract_tree()
    key = (token.id, diff_id)
    state.newest_diff[token.id] = diff_id
    out.launched = key

    _send_down(out, token.id, diff_id, Phase.DOWN, token.tasks.copy(), tree)
    logger.debug(
        "Node %d launched %s diffusion %d over %d nodes at t=%.1f (b=%.2f)",
        state.node, cfg.method.value, diff_id, len(tree), now, bound,
    )

    if cfg.method.collects_feedback:
        children = tree.children_of(state.node)
        if children:
            _open_record(state, out, key, None, children, tree, cfg, n, now)
        else:
            _close(state, out, key, _leaf_record(tree, cfg.method, now))
    return out


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------


def on_down_msg(state: NodeState, src: NodeId, msg: DiffusionMsg, cfg: MethodConfig, n: int, now: float) -> Outbox:
    """Merge a Down/FinalDown payload and forward it to this node's subtree children."""
    out = Outbox()
    if msg.token_id not in state.token_ids:
        out.rejected = True
        return out

    state.view.merge(msg.tasks)

    if msg.phase is Phase.FINAL_DOWN:
        _send_down(out, msg.token_id, msg.diff_id, Phase.FINAL_DOWN, msg.tasks, msg.tree)
        return out

    newest = state.newest_diff.get(msg.token_id, -1)
    if cfg.method.collects_feedback and msg.diff_id < newest:
        out.stale = True
        return out
    state.newest_diff[msg.token_id] = max(newest, msg.diff_id)

    payload = msg.tasks.copy().merge(state.view)
    _send_down(out, msg.token_id, msg.diff_id, Phase.DOWN, payload, msg.tree)

    if cfg.method.collects_feedback:
        children = msg.tree.children_of(state.node)
        if children:
            _open_record(state, out, msg.key, src, children, msg.tree, cfg, n, now)
        else:
            out.sends.append((src, FeedbackMsg(msg.token_id, msg.diff_id, state.view.copy())))
    return out


def on_feedback_msg(state: NodeState, src: NodeId, msg: FeedbackMsg, now: float) -> Outbox:
    """Account a son's answer; close the record once every son answered."""
    out = Outbox()
    if msg.token_id not in state.token_ids:
        out.rejected = True
        return out

    state.view.merge(msg.tasks)
    record = state.records.get(msg.key)
    if record is None or src not in record.pending_sons:
        out.late = True
        return out

    record.acc.merge(msg.tasks)
    record.pending_sons.discard(src)
    if not record.pending_sons:
        del state.records[msg.key]
        _close(state, out, msg.key, record)
    return out


def on_feedback_timeout(state: NodeState, key: DiffusionKey, now: float) -> Outbox:
    """Close a record whose sons did not all answer in time. No-op if already closed."""
    out = Outbox()
    record = state.records.pop(key, None)
    if record is None:
        return out

    out.timed_out = True
    logger.debug(
        "Node %d timed out on diffusion %d at t=%.1f, missing sons %s",
        state.node, key[1], now, sorted(record.pending_sons),
    )
    _close(state, out, key, record)
    return out


# ---------------------------------------------------------------------------
# Computation
# ---------------------------------------------------------------------------


def on_local_idle(state: NodeState, now: float, claim_grace: float | None = None) -> TaskId | None:
    """
    Start a task if the node is idle and its view offers one.

    With claim_grace set, a node that finds no UNCOMPUTED task may take over a stale
    claim instead.

    Returns:
        The started task id, or None (busy, or nothing to do).
    """
    if state.computing is not None:
        return None
    task_id = state.view.select_task(state.rng, state.node, now)
    if task_id is None and claim_grace is not None:
        task_id = state.view.reclaim_task(state.rng, state.node, now, claim_grace)
    state.computing = task_id
    return task_id


def on_task_done(state: NodeState, task_id: TaskId, now: float) -> bool:
    """
    Finish the running task.

    Returns:
        True when the local entry moved to COMPUTED; False when a merge had already
        made it COMPUTED (the computation was a replica).
    """
    state.computing = None
    if state.view.state_of(task_id) is TaskState.COMPUTED:
        return False
    state.view.complete_task(task_id, state.node, now)
    return True


# ---------------------------------------------------------------------------
# Internals
# ---------------------------------------------------------------------------


def _send_down(out: Outbox, token_id: TokenId, diff_id: int, phase: Phase, tasks: TaskStateSet, tree: SpanTree):
    for child in tree.children_of(tree.root):
        out.sends.append((child, DiffusionMsg(token_id, diff_id, phase, tasks, tree.subtree(child))))


def _open_record(
    state: NodeState,
    out: Outbox,
    key: DiffusionKey,
    father: NodeId | None,
    children: tuple[NodeId, ...],
    tree: SpanTree,
    cfg: MethodConfig,
    n: int,
    now: float,
) -> None:
    deadline = now + cfg.timeout_for(n)
    state.records[key] = DiffusionRecord(
        father=father,
        pending_sons=set(children),
        acc=TaskStateSet(),
        deadline=deadline,
        method=cfg.method,
        tree=tree,
    )
    out.timers.append((deadline, key))


def _leaf_record(tree: SpanTree, method: Method, now: float) -> DiffusionRecord:
    return DiffusionRecord(None, set(), TaskStateSet(), now, method, tree)


def _close(state: NodeState, out: Outbox, key: DiffusionKey, record: DiffusionRecord) -> None:
    out.closed = key
    state.view.merge(record.acc)
    token_id, diff_id = key

    if not record.is_initiator:
        out.sends.append((record.father, FeedbackMsg(token_id, diff_id, state.view.copy())))
    elif record.method is Method.DM:
        out.final = True
        _send_down(out, token_id, diff_id, Phase.FINAL_DOWN, state.view.copy(), record.tree)
