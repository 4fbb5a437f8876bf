"""
Grid communication topology.

A Topology is the immutable neighbour map N_i of every node. Links are symmetric:
diffusion messages travel both down (parent to child) and up (child to parent) the
trees extracted from the token's walk, so every link must be usable both ways.

Generators:
  ring      cycle 0-1-...-(n-1)-0
  complete  every pair linked
  path      chain 0-1-...-(n-1)
  random    each undirected edge drawn with probability p, plus a random
            Hamiltonian-path backbone so the graph is always connected

Usage:
    from apps.grid.topology import generate_topology

    topo = generate_topology(50, "random", seed=7, p=0.1)
    topo.neighbors(3)  # -> (0, 12, 41), ascending
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

from core.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

NodeId = int

MODELS = ("ring", "complete", "path", "random")


@dataclass(frozen=True)
class Topology:
    """
    Immutable symmetric neighbour map over dense node ids 0..n-1.

    Attributes:
        n: Node count.
        adjacency: adjacency[i] is N_i as an ascending tuple.
    """

    n: int
    adjacency: tuple[tuple[NodeId, ...], ...]

    def __post_init__(self):
        if self.n < 1 or len(self.adjacency) != self.n:
            raise InvalidParameterError(
                f"Topology needs one neighbour row per node (n={self.n}, rows={len(self.adjacency)})."
            )
        for i, row in enumerate(self.adjacency):
            if list(row) != sorted(set(row)):
                raise InvalidParameterError(f"Neighbours of node {i} must be ascending and unique.")
            for j in row:
                if j == i:
                    raise InvalidParameterError(f"Self-loop on node {i}.")
                if not 0 <= j < self.n:
                    raise InvalidParameterError(f"Node {i} lists unknown neighbour {j}.")
                if i not in self.adjacency[j]:
                    raise InvalidParameterError(f"Link {i}-{j} is not symmetric.")

    @classmethod
    def from_graph(cls, graph: nx.Graph) -> "Topology":
        """Build a Topology from an undirected networkx graph over nodes 0..n-1."""
        n = graph.number_of_nodes()
        return cls(n=n, adjacency=tuple(tuple(sorted(graph.neighbors(i))) for i in range(n)))

    def neighbors(self, i: NodeId) -> tuple[NodeId, ...]:
        """
        Return N_i in ascending order.

        Raises:
            InvalidParameterError: If i is not a node of this topology.
        """
        if not 0 <= i < self.n:
            raise InvalidParameterError(f"Unknown node {i} (n={self.n}).")
        return self.adjacency[i]

    def has_edge(self, i: NodeId, j: NodeId) -> bool:
        return 0 <= i < self.n and j in self.adjacency[i]

    @cached_property
    def graph(self) -> nx.Graph:
        """The same topology as a networkx graph (built once, read-only by convention)."""
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges())
        return g

    def edges(self) -> list[tuple[NodeId, NodeId]]:
        """Undirected edges (i, j) with i < j, ascending."""
        return [(i, j) for i, row in enumerate(self.adjacency) for j in row if i < j]

    def is_connected(self) -> bool:
        return nx.is_connected(self.graph)

    # ------------------------------------------------------------------
    # Edge-list files
    # ------------------------------------------------------------------

    def dump(self, path: Path) -> None:
        """Write the topology as `n=<count>` followed by one `i j` line per edge."""
        lines = [f"n={self.n}"] + [f"{i} {j}" for i, j in self.edges()]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Topology":
        """
        Read an edge-list file written by dump().

        Raises:
            InvalidParameterError: On a missing header or a malformed line (1-based line number in message).
        """
        text = Path(path).read_text(encoding="utf-8").splitlines()
        if not text or not text[0].startswith("n="):
            raise InvalidParameterError(f"{path}: line 1: expected header 'n=<count>'.")
        try:
            n = int(text[0][2:])
        except ValueError:
            raise InvalidParameterError(f"{path}: line 1: bad node count {text[0][2:]!r}.") from None

        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        for lineno, line in enumerate(text[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            try:
                i, j = (int(x) for x in parts)
            except ValueError:
                raise InvalidParameterError(f"{path}: line {lineno}: expected 'i j', got {line!r}.") from None
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise InvalidParameterError(f"{path}: line {lineno}: invalid edge {i}-{j}.")
            graph.add_edge(i, j)
        return cls.from_graph(graph)


def generate_topology(n: int, model: str, seed: int = 0, p: float | None = None) -> Topology:
    """
    Generate a reproducible topology.

    Args:
        n: Node count (>= 2).
        model: One of ring, complete, path, random.
        seed: RNG seed; only the random model consumes it.
        p: Edge probability for the random model, 0 < p <= 1.

    Returns:
        A connected, symmetric Topology without self-loops.

    Raises:
        InvalidParameterError: On n < 2, an unknown model, or p outside (0, 1].
    """
    if n < 2:
        raise InvalidParameterError(f"Topology requires n >= 2, got {n}.")

    if model == "ring":
        graph = nx.cycle_graph(n)
    elif model == "complete":
        graph = nx.complete_graph(n)
    elif model == "path":
        graph = nx.path_graph(n)
    elif model == "random":
        if p is None or not 0 < p <= 1:
            raise InvalidParameterError(f"Random topology requires 0 < p <= 1, got {p}.")
        rng = np.random.default_rng(seed)
        graph = nx.fast_gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
        # Backbone: a random Hamiltonian path guarantees connectivity
        order = rng.permutation(n)
        graph.add_edges_from(zip(order[:-1].tolist(), order[1:].tolist()))
    else:
        raise InvalidParameterError(f"Unknown topology model {model!r}; expected one of {', '.join(MODELS)}.")

    topo = Topology.from_graph(graph)
    logger.debug("Generated %s topology: n=%d edges=%d", model, n, len(topo.edges()))
    return topo


def parse_topology_option(value: str) -> tuple[str, float | None, Path | None]:
    """
    Parse a `--topology` value: ring | complete | path | random:<p> | file:<path>.

    Returns:
        (model, p, path) where only the fields relevant to the model are set.
    """
    if value.startswith("file:"):
        return "file", None, Path(value[5:])
    if value.startswith("random:"):
        try:
            return "random", float(value[7:]), None
        except ValueError:
            raise InvalidParameterError(f"Bad edge probability in {value!r}.") from None
    if value in ("ring", "complete", "path"):
        return value, None, None
    if value == "random":
        raise InvalidParameterError("Random topology needs an edge probability, e.g. random:0.1.")
    raise InvalidParameterError(f"Unknown topology {value!r}.")
