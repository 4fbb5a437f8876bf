"""
Deterministic discrete-event simulator.

One Simulator owns one world: topology, node states, the token, the event queue and
the counters. run() drives it from t=0 until every task has been computed somewhere
(t_distributed), then optionally on until every live node knows every result
(t_propagate), or until max_time.

Time model:
  - A token hop and a message hop both take hop_cost.
  - Nodes compute while the token travels; a task of length L started at t ends at t + L.
  - Every node picks a task at t=0, before the token's first arrival at node 0.

Faults:
  - Crashes come from the config's crash plan (or inject_crash before run()).
  - A crash aimed at the token holder, or at the node the token is travelling to, is
    deferred until the token leaves that node.
  - A dead node handles nothing: messages to it are dropped, its timers and its running
    task are lost, and the walk skips it.

Design notes:
  - Counters, completions and diffusion stats are frozen once every event at
    t_distributed has been handled; the propagation phase only measures t_propagate.
  - All randomness comes from core.streams, one stream per concern.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO

from apps.engine.config import SimConfig
from apps.engine.events import Envelope, EventKind, EventQueue, SimEvent
from apps.engine.trace import TraceLog
from apps.grid.topology import Topology, generate_topology, parse_topology_option
from apps.protocol.messages import DiffusionMsg, FeedbackMsg, Method, NodeId, Phase, Token
from apps.protocol.methods import (
    NodeState,
    Outbox,
    on_down_msg,
    on_feedback_msg,
    on_feedback_timeout,
    on_local_idle,
    on_task_done,
    on_token_arrival,
)
from apps.wordtree.wordtree import CirculatingWord, SpanTree
from apps.workload.taskset import TaskId, TaskState, TaskStateSet, generate_tasks
from core.exceptions import InvalidParameterError, InvalidStateError
from core.streams import TASKS_STREAM, TOPOLOGY_STREAM, WALK_STREAM, SeedStreams

logger = logging.getLogger(__name__)

TOKEN_ID = 0
MESSAGE_KINDS = ("down", "feedback", "final")


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


@dataclass
class MessageCounts:
    """Messages sent per class; dropped counts deliveries to dead nodes."""

    token_hops: int = 0
    down: int = 0
    feedback: int = 0
    final_down: int = 0
    dropped: int = 0
    invalid: int = 0

    @property
    def total(self) -> int:
        """Token hops plus diffusion messages."""
        return self.token_hops + self.down + self.feedback + self.final_down


@dataclass(frozen=True)
class MessageFlow:
    """sent == delivered + dropped + in_flight for one message class."""

    sent: int
    delivered: int
    dropped: int
    in_flight: int


@dataclass
class DiffusionStats:
    """
    Instrumentation for one diffusion.

    Attributes:
        converged: Dm only. Whether every live node of the tree held the same view
            when the last FinalDown message landed; None until then.
    """

    diff_id: int
    initiator: NodeId
    launched_at: float
    tree_size: int
    depth: int
    down: int = 0
    feedback: int = 0
    final: int = 0
    timeouts: int = 0
    stale: int = 0
    late: int = 0
    closed_at: float | None = None
    converged: bool | None = None
    tree: SpanTree | None = field(default=None, repr=False, compare=False)

    @property
    def wave_messages(self) -> int:
        return self.down + self.feedback


@dataclass
class RunResult:
    """
    Outcome of one run.

    Attributes:
        complete: False when max_time stopped the run before every task was computed.
        t_distributed: Time of the last first-completion (max_time when incomplete).
        t_sequential: Sum of task lengths.
        t_propagate: Time every live node knew every result; None if never reached or not tracked.
        completions: Finished computations per task id, up to t_distributed.
        replicated: Sum over tasks of (completions - 1).
        token_arrivals: TokenArrive events handled, up to t_distributed.
        timeout_fires: Timeout events handled per (node, diff_id).
        divergences: Sum of merge divergence counters over node views.
        crashed: Nodes crashed by t_distributed, in crash order.
        views: Final per-node views, when requested.
        last_tree: Tree of the last diffusion launched.
    """

    config: SimConfig
    complete: bool
    t_distributed: float
    t_sequential: float
    t_propagate: float | None
    messages: MessageCounts
    flows: dict[str, MessageFlow]
    completions: dict[TaskId, int]
    replicated: int
    diffusions: list[DiffusionStats]
    token_arrivals: int
    timeout_fires: Counter
    events: int
    divergences: int
    crashed: tuple[NodeId, ...]
    trace_hash: str
    trace_lines: list[str] | None = field(default=None, repr=False)
    views: dict[NodeId, TaskStateSet] | None = field(default=None, repr=False)
    last_tree: SpanTree | None = field(default=None, repr=False)


@dataclass
class _Snapshot:
    messages: MessageCounts
    flows: dict[str, MessageFlow]
    completions: dict[TaskId, int]
    diffusions: list[DiffusionStats]
    token_arrivals: int
    timeout_fires: Counter
    events: int
    divergences: int
    crashed: tuple[NodeId, ...]


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------


class Simulator:
    """
    One simulated world.

    Args:
        config: Run parameters.
        topology: Overrides the topology named in the config.
        trace_stream: Text stream receiving the trace, if any.
        keep_trace: Keep trace lines on the result.
        keep_views: Keep final node views on the result.

    Raises:
        InvalidParameterError: When the topology is disconnected or does not have config.n nodes.
    """

    def __init__(
        self,
        config: SimConfig,
        topology: Topology | None = None,
        trace_stream: IO[str] | None = None,
        keep_trace: bool = False,
        keep_views: bool = False,
    ):
        self.config = config
        self.n = config.n
        self.streams = SeedStreams(config.seed, config.n)
        self.topology = topology or self._build_topology()
        if self.topology.n != config.n:
            raise InvalidParameterError(f"Topology has {self.topology.n} nodes, config says {config.n}.")
        if not self.topology.is_connected():
            raise InvalidParameterError("Topology is disconnected; the token could never cover it.")

        workload = generate_tasks(config.tasks, 0, config.mu, config.sigma, self.streams.seed(TASKS_STREAM))
        self.t_sequential = float(sum(workload.length_of(t) for t in workload))
        self.max_time = (
            config.max_time
            if config.max_time is not None
            else self.t_sequential + 100.0 * config.n * config.hop_cost
        )

        self.nodes = [
            NodeState(i, workload.copy(), self.streams.node_generator(i), frozenset({TOKEN_ID}))
            for i in range(config.n)
        ]
        self.alive = [True] * config.n
        self.token = Token(id=TOKEN_ID, tasks=workload.copy(), word=CirculatingWord(self.topology))
        self.token_at: NodeId = 0
        self.walk_rng = self.streams.generator(WALK_STREAM)

        self.queue = EventQueue()
        self.trace = TraceLog(trace_stream, keep_lines=keep_trace)
        self.keep_views = keep_views

        self.messages = MessageCounts()
        self.sent: Counter = Counter()
        self.delivered: Counter = Counter()
        self.dropped: Counter = Counter()
        self.completions: Counter = Counter()
        self.first_completion: dict[TaskId, float] = {}
        self.diffusions: dict[int, DiffusionStats] = {}
        self.final_pending: Counter = Counter()
        self.timeout_fires: Counter = Counter()
        self.token_arrivals = 0
        self.events = 0
        self.deferred_crashes: set[NodeId] = set()
        self.crashed: list[NodeId] = []
        self.last_tree: SpanTree | None = None

        self.t_distributed: float | None = None
        self.t_propagate: float | None = None
        self._snapshot: _Snapshot | None = None
        self._unaware: set[NodeId] = set()

        for time, node in config.crashes:
            self.inject_crash(node, time)

    def _build_topology(self) -> Topology:
        model, p, path = parse_topology_option(self.config.topology)
        if model == "file":
            return Topology.load(path)
        if self.config.n == 1:
            return Topology(n=1, adjacency=((),))
        return generate_topology(self.config.n, model, seed=self.streams.seed(TOPOLOGY_STREAM), p=p)

    # ------------------------------------------------------------------
    # Public operations
    # ------------------------------------------------------------------

    def inject_crash(self, node: NodeId, time: float) -> None:
        """Schedule a crash of node at time."""
        if not 0 <= node < self.n:
            raise InvalidParameterError(f"Cannot crash unknown node {node}.")
        self.queue.push(time, EventKind.CRASH, node)

    def step_token(self, holder: NodeId) -> NodeId | None:
        """
        Pick the token's next node uniformly among holder's live neighbours.

        Returns:
            The chosen neighbour, or None when none is alive.
        """
        live = [v for v in self.topology.neighbors(holder) if self.alive[v]]
        if not live:
            return None
        return live[int(self.walk_rng.integers(len(live)))]

    def run(self) -> RunResult:
        """Run the simulation to completion (or max_time) and return its result."""
        logger.info(
            "Run start: method=%s n=%d tasks=%d seed=%d",
            self.config.method_name.value, self.n, self.config.tasks, self.config.seed,
        )
        for state in self.nodes:
            self._maybe_start(state.node, 0.0)
        self.queue.push(0.0, EventKind.TOKEN_ARRIVE, 0, None)

        while self.queue:
            next_time = self.queue.peek_time()
            if self.t_distributed is not None and self._snapshot is None and next_time > self.t_distributed:
                self._take_snapshot()
                if not self.config.track_propagation or self.t_propagate is not None:
                    break
            if next_time > self.max_time:
                break
            event = self.queue.pop()
            self.events += 1
            self._handle(event)
            if self._snapshot is not None and self.t_propagate is None:
                self._track_propagation(event)
                if self.t_propagate is not None:
                    break

        if self._snapshot is None:
            self._take_snapshot()
        return self._result()

    # ------------------------------------------------------------------
    # Event handlers
    # ------------------------------------------------------------------

    def _handle(self, event: SimEvent) -> None:
        if event.kind is EventKind.TOKEN_ARRIVE:
            self._on_token_arrive(event)
        elif event.kind is EventKind.TOKEN_RETRY:
            self.trace.record(event.time, "retry", event.node)
            self._depart(event.node, event.time)
        elif event.kind is EventKind.DELIVER:
            self._on_deliver(event)
        elif event.kind is EventKind.TASK_DONE:
            self._on_task_done(event)
        elif event.kind is EventKind.TIMEOUT:
            self._on_timeout(event)
        elif event.kind is EventKind.CRASH:
            self._on_crash(event)

    def _on_token_arrive(self, event: SimEvent) -> None:
        node, now = event.node, event.time
        self.token_arrivals += 1
        if event.payload is not None:
            self.messages.token_hops += 1
        self.trace.record(now, "token", event.payload, node, None, len(self.token.tasks))

        out = on_token_arrival(self.nodes[node], self.token, self.config.method, self.n, now)
        if out.launched is not None:
            self._open_stats(node, out.launched[1], now)
        self._dispatch(node, out, now)
        self._maybe_start(node, now)
        self._depart(node, now)

    def _depart(self, node: NodeId, now: float) -> None:
        nxt = self.step_token(node)
        if nxt is None:
            if self.topology.neighbors(node):
                self.queue.push(now + self.config.hop_cost, EventKind.TOKEN_RETRY, node)
            return
        self.token_at = nxt
        self.queue.push(now + self.config.hop_cost, EventKind.TOKEN_ARRIVE, nxt, node)
        if node in self.deferred_crashes:
            self.deferred_crashes.discard(node)
            self._crash(node, now)

    def _on_deliver(self, event: SimEvent) -> None:
        env: Envelope = event.payload
        msg, now = env.msg, event.time
        if not self.alive[env.dst]:
            self.dropped[msg.kind] += 1
            self.messages.dropped += 1
            self.trace.record(now, f"drop-{msg.kind}", env.src, env.dst, msg.diff_id, len(msg.tasks))
            self._final_landed(msg)
            return

        self.delivered[msg.kind] += 1
        self.trace.record(now, msg.kind, env.src, env.dst, msg.diff_id, len(msg.tasks))
        state = self.nodes[env.dst]
        if isinstance(msg, DiffusionMsg):
            out = on_down_msg(state, env.src, msg, self.config.method, self.n, now)
        else:
            out = on_feedback_msg(state, env.src, msg, now)
        self._dispatch(env.dst, out, now, msg.diff_id)
        self._maybe_start(env.dst, now)
        self._final_landed(msg)

    def _on_task_done(self, event: SimEvent) -> None:
        node, task_id, now = event.node, event.payload, event.time
        if not self.alive[node]:
            self.trace.record(now, "lost", node, task_id)
            return

        on_task_done(self.nodes[node], task_id, now)
        self.trace.record(now, "done", node, task_id)
        if self._snapshot is None:
            self.completions[task_id] += 1
            if task_id not in self.first_completion:
                self.first_completion[task_id] = now
                if len(self.first_completion) == self.config.tasks:
                    self.t_distributed = now
                    logger.debug("All %d tasks computed at t=%.3f", self.config.tasks, now)
        self._maybe_start(node, now)

    def _on_timeout(self, event: SimEvent) -> None:
        node, key, now = event.node, event.payload, event.time
        if not self.alive[node]:
            return
        self.timeout_fires[(node, key[1])] += 1
        out = on_feedback_timeout(self.nodes[node], key, now)
        if out.timed_out:
            self.trace.record(now, "timeout", node, node, key[1])
        self._dispatch(node, out, now, key[1])

    def _on_crash(self, event: SimEvent) -> None:
        node, now = event.node, event.time
        if not self.alive[node] or node in self.deferred_crashes:
            return
        if node == self.token_at:
            logger.warning("Crash of node %d at t=%.3f deferred: the token is there", node, now)
            self.deferred_crashes.add(node)
            return
        self._crash(node, now)

    def _crash(self, node: NodeId, now: float) -> None:
        self.alive[node] = False
        state = self.nodes[node]
        state.records.clear()
        state.computing = None
        self.crashed.append(node)
        self._unaware.discard(node)
        self.trace.record(now, "crash", node)
        logger.debug("Node %d crashed at t=%.3f", node, now)

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _maybe_start(self, node: NodeId, now: float) -> None:
        if not self.alive[node]:
            return
        state = self.nodes[node]
        task_id = on_local_idle(state, now, self.config.claim_grace)
        if task_id is not None:
            self.queue.push(now + state.view.length_of(task_id), EventKind.TASK_DONE, node, task_id)

    def _dispatch(self, node: NodeId, out: Outbox, now: float, diff_id: int | None = None) -> None:
        for dst, msg in out.sends:
            self.sent[msg.kind] += 1
            stats = self.diffusions.get(msg.diff_id)
            if isinstance(msg, FeedbackMsg):
                self.messages.feedback += 1
                if stats is not None:
                    stats.feedback += 1
            elif msg.phase is Phase.DOWN:
                self.messages.down += 1
                if stats is not None:
                    stats.down += 1
            else:
                self.messages.final_down += 1
                self.final_pending[msg.diff_id] += 1
                if stats is not None:
                    stats.final += 1
            self.queue.push(now + self.config.hop_cost, EventKind.DELIVER, dst, Envelope(node, dst, msg))

        for when, key in out.timers:
            self.queue.push(when, EventKind.TIMEOUT, node, key)

        if out.launched is not None:
            diff_id = out.launched[1]
        stats = self.diffusions.get(diff_id) if diff_id is not None else None
        if stats is not None:
            stats.timeouts += out.timed_out
            stats.stale += out.stale
            stats.late += out.late
            if out.closed is not None and node == stats.initiator and stats.closed_at is None:
                stats.closed_at = now
        if out.rejected:
            self.messages.invalid += 1
            logger.warning("Node %d dropped a message for an unknown token at t=%.3f", node, now)

    def _open_stats(self, node: NodeId, diff_id: int, now: float) -> None:
        tree = self.token.word.extract_tree()
        self.last_tree = tree
        self.diffusions[diff_id] = DiffusionStats(
            diff_id=diff_id,
            initiator=node,
            launched_at=now,
            tree_size=len(tree),
            depth=tree.depth(),
            tree=tree if self.config.method_name is Method.DM else None,
        )

    def _final_landed(self, msg) -> None:
        if not isinstance(msg, DiffusionMsg) or msg.phase is not Phase.FINAL_DOWN:
            return
        self.final_pending[msg.diff_id] -= 1
        if self.final_pending[msg.diff_id] > 0:
            return
        del self.final_pending[msg.diff_id]
        stats = self.diffusions.get(msg.diff_id)
        if stats is not None and stats.tree is not None:
            stats.converged = self._tree_converged(stats.tree)
            stats.tree = None

    def _tree_converged(self, tree: SpanTree) -> bool:
        dead = {i for i, ok in enumerate(self.alive) if not ok}
        try:
            live_tree = tree.prune_crashed(dead)
        except InvalidStateError:
            return False
        reference = self.nodes[live_tree.root].view
        return all(self.nodes[v].view.same_view(reference) for v in live_tree.walk())

    def _knows_everything(self, node: NodeId) -> bool:
        return self.nodes[node].view.count(TaskState.COMPUTED) == self.config.tasks

    def _track_propagation(self, event: SimEvent) -> None:
        if event.node in self._unaware and self._knows_everything(event.node):
            self._unaware.discard(event.node)
        if not self._unaware:
            self.t_propagate = event.time

    def _take_snapshot(self) -> None:
        in_flight: Counter = Counter(e.payload.msg.kind for e in self.queue if e.kind is EventKind.DELIVER)
        self._snapshot = _Snapshot(
            messages=replace(self.messages),
            flows={
                kind: MessageFlow(self.sent[kind], self.delivered[kind], self.dropped[kind], in_flight[kind])
                for kind in MESSAGE_KINDS
            },
            completions=dict(sorted(self.completions.items())),
            diffusions=[replace(s) for s in self.diffusions.values()],
            token_arrivals=self.token_arrivals,
            timeout_fires=Counter(self.timeout_fires),
            events=self.events,
            divergences=sum(state.view.divergences for state in self.nodes),
            crashed=tuple(self.crashed),
        )
        self._unaware = {i for i in range(self.n) if self.alive[i] and not self._knows_everything(i)}
        if self.t_distributed is not None and not self._unaware:
            self.t_propagate = self.t_distributed

    def _result(self) -> RunResult:
        snap = self._snapshot
        complete = self.t_distributed is not None
        if not complete:
            logger.warning(
                "Run stopped at max_time=%.1f with %d/%d tasks computed (method=%s n=%d seed=%d)",
                self.max_time, len(self.first_completion), self.config.tasks,
                self.config.method_name.value, self.n, self.config.seed,
            )
        t_dist = self.t_distributed if complete else self.max_time
        replicated = sum(c - 1 for c in snap.completions.values())
        logger.info(
            "Run done: method=%s n=%d tasks=%d t_dist=%.1f replicated=%d messages=%d",
            self.config.method_name.value, self.n, self.config.tasks, t_dist, replicated, snap.messages.total,
        )
        return RunResult(
            config=self.config,
            complete=complete,
            t_distributed=t_dist,
            t_sequential=self.t_sequential,
            t_propagate=self.t_propagate,
            messages=snap.messages,
            flows=snap.flows,
            completions=snap.completions,
            replicated=replicated,
            diffusions=snap.diffusions,
            token_arrivals=snap.token_arrivals,
            timeout_fires=snap.timeout_fires,
            events=snap.events,
            divergences=snap.divergences,
            crashed=snap.crashed,
            trace_hash=self.trace.hexdigest,
            trace_lines=self.trace.lines,
            views={s.node: s.view for s in self.nodes} if self.keep_views else None,
            last_tree=self.last_tree,
        )


def run_simulation(config: SimConfig, **kwargs) -> RunResult:
    """Build a Simulator for config and run it."""
    return Simulator(config, **kwargs).run()

