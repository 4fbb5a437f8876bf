"""
Circulating word and the spanning trees derived from it.

The token carries the history of the nodes it visited. The diffusion tree rooted at
the current holder gives every other visited node v the parent "node visited right
after v's most recent visit". Only that relation matters, so the word is stored in
reduced form: the parent map plus the holder. A hop u -> v sets parent(u) = v,
drops parent(v) and makes v the holder, in O(1).

The full visit sequence is never kept. `CirculatingWord.visits` rebuilds a canonical
reduced word on demand: an Euler tour of the tree ending at the holder, which yields
the same tree and has at most 2 * (distinct ids) - 1 entries.

Trees are immutable snapshots. A subtree shares its index with the tree it came from,
so cutting the per-child payloads of a diffusion costs nothing until a node set is asked for.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Iterator

from core.exceptions import InvalidParameterError, InvalidStateError, ProtocolViolationError

if TYPE_CHECKING:
    from apps.grid.topology import Topology

logger = logging.getLogger(__name__)

NodeId = int


@dataclass(frozen=True)
class _TreeIndex:
    """Parent and children maps shared by a tree and all of its subtrees."""

    parent: dict[NodeId, NodeId]
    children: dict[NodeId, tuple[NodeId, ...]]

    @classmethod
    def from_parents(cls, parent: dict[NodeId, NodeId]) -> "_TreeIndex":
        kids: dict[NodeId, list[NodeId]] = {}
        for child, father in parent.items():
            kids.setdefault(father, []).append(child)
        return cls(parent=parent, children={k: tuple(sorted(v)) for k, v in kids.items()})


@dataclass(frozen=True)
class SpanTree:
    """
    Spanning tree of the visited nodes, rooted at `root`.

    Covered nodes are `root` and its descendants in the shared index. Parent and
    children lookups answer only for covered nodes.
    """

    root: NodeId
    _index: _TreeIndex = field(repr=False, compare=False)

    @classmethod
    def from_parents(cls, root: NodeId, parent: dict[NodeId, NodeId]) -> "SpanTree":
        return cls(root=root, _index=_TreeIndex.from_parents(dict(parent)))

    def children_of(self, v: NodeId) -> tuple[NodeId, ...]:
        """Children of v, ascending."""
        return self._index.children.get(v, ())

    def parent_of(self, v: NodeId) -> NodeId | None:
        """Parent of v inside this tree; None for the root."""
        if v == self.root:
            return None
        if v not in self.nodes:
            raise InvalidParameterError(f"Node {v} is not covered by the tree rooted at {self.root}.")
        return self._index.parent[v]

    @cached_property
    def nodes(self) -> frozenset[NodeId]:
        """Covered node set (root plus descendants)."""
        return frozenset(self.walk())

    @cached_property
    def parent(self) -> dict[NodeId, NodeId]:
        """Parent map restricted to this tree (root excluded)."""
        return {v: self._index.parent[v] for v in self.nodes if v != self.root}

    def walk(self) -> Iterator[NodeId]:
        """Pre-order traversal, children ascending."""
        stack = [self.root]
        while stack:
            v = stack.pop()
            yield v
            stack.extend(reversed(self.children_of(v)))

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, v: object) -> bool:
        return v in self.nodes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpanTree):
            return NotImplemented
        return self.root == other.root and self.parent == other.parent

    def __hash__(self) -> int:
        return hash((self.root, self.nodes))

    def subtree(self, v: NodeId) -> "SpanTree":
        """
        Subtree rooted at v, used to shrink diffusion payloads.

        Raises:
            InvalidParameterError: If v is not covered.
        """
        if v == self.root:
            return self
        # Forwarding only ever cuts at a direct child; skip the full node-set scan
        if v not in self.children_of(self.root) and v not in self.nodes:
            raise InvalidParameterError(f"Node {v} is not covered by the tree rooted at {self.root}.")
        return SpanTree(root=v, _index=self._index)

    def prune_crashed(self, dead: Iterable[NodeId]) -> "SpanTree":
        """
        Drop dead nodes and everything whose parent path crosses one.

        Raises:
            InvalidStateError: If the root itself is dead.
        """
        dead = set(dead)
        if self.root in dead:
            raise InvalidStateError(f"Cannot prune a tree whose root {self.root} crashed.")
        if not dead & self.nodes:
            return self

        kept: dict[NodeId, NodeId] = {}
        stack = [self.root]
        while stack:
            v = stack.pop()
            for c in self.children_of(v):
                if c not in dead:
                    kept[c] = v
                    stack.append(c)
        return SpanTree.from_parents(self.root, kept)

    def depth(self) -> int:
        """Longest root-to-leaf edge count."""
        best = 0
        stack = [(self.root, 0)]
        while stack:
            v, d = stack.pop()
            best = max(best, d)
            stack.extend((c, d + 1) for c in self.children_of(v))
        return best

    def to_text(self) -> str:
        """Indented dump, one node per line, children ascending."""
        lines = []
        stack = [(self.root, 0)]
        while stack:
            v, d = stack.pop()
            lines.append("  " * d + str(v))
            stack.extend((c, d + 1) for c in reversed(self.children_of(v)))
        return "\n".join(lines) + "\n"


class CirculatingWord:
    """
    Visit history carried by the token, kept in reduced form.

    Args:
        topology: When given, every appended visit must be a neighbour of the holder.
    """

    __slots__ = ("_parent", "_holder", "_topology")

    def __init__(self, topology: "Topology | None" = None):
        self._parent: dict[NodeId, NodeId] = {}
        self._holder: NodeId | None = None
        self._topology = topology

    @property
    def holder(self) -> NodeId | None:
        return self._holder

    def __bool__(self) -> bool:
        return self._holder is not None

    def __len__(self) -> int:
        """Distinct visited ids."""
        return 0 if self._holder is None else len(self._parent) + 1

    def covered(self) -> frozenset[NodeId]:
        if self._holder is None:
            return frozenset()
        return frozenset(self._parent) | {self._holder}

    def append_visit(self, i: NodeId) -> "CirculatingWord":
        """
        Record the token's arrival at i.

        Raises:
            ProtocolViolationError: If i is not a neighbour of the current holder.
        """
        holder = self._holder
        if holder is not None:
            if i == holder or (self._topology is not None and not self._topology.has_edge(holder, i)):
                raise ProtocolViolationError(f"Token cannot hop {holder} -> {i}: not a link.")
            self._parent[holder] = i
            self._parent.pop(i, None)
        self._holder = i
        return self

    def extract_tree(self) -> SpanTree:
        """
        Spanning tree of the visited nodes rooted at the holder.

        Raises:
            InvalidStateError: If nothing has been visited yet.
        """
        if self._holder is None:
            raise InvalidStateError("Cannot extract a tree from an empty word.")
        return SpanTree.from_parents(self._holder, self._parent)

    @property
    def visits(self) -> list[NodeId]:
        """
        Canonical reduced word: Euler tour of the tree, ending at the holder.

        Each non-root node's last occurrence is followed by its parent, so scanning
        this sequence gives back exactly extract_tree().
        """
        if self._holder is None:
            return []
        tree = self.extract_tree()
        tour = [tree.root]
        # Iterative DFS: path-like walk trees are deeper than the recursion limit
        stack = [(tree.root, iter(tree.children_of(tree.root)))]
        while stack:
            child = next(stack[-1][1], None)
            if child is None:
                stack.pop()
                if stack:
                    tour.append(stack[-1][0])
            else:
                tour.append(child)
                stack.append((child, iter(tree.children_of(child))))
        return tour

    def copy(self) -> "CirculatingWord":
        clone = CirculatingWord(self._topology)
        clone._parent = dict(self._parent)
        clone._holder = self._holder
        return clone
