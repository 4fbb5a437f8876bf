"""
Seeded random streams.

Every run derives all of its randomness from one master seed through numpy's
SeedSequence, so adding a node or reordering handlers never shifts another stream.

Stream layout (spawn order is part of the determinism contract):
  0: topology generation
  1: task lengths
  2: token walk
  3..3+n-1: per-node task selection
"""

import numpy as np

from core.exceptions import InvalidParameterError

TOPOLOGY_STREAM = 0
TASKS_STREAM = 1
WALK_STREAM = 2
NODE_STREAM_BASE = 3


class SeedStreams:
    """Named child seeds and generators derived from a master seed."""

    def __init__(self, master_seed: int, n_nodes: int):
        if master_seed < 0:
            raise InvalidParameterError(f"Seed must be non-negative, got {master_seed}.")
        self.master_seed = master_seed
        self._children = np.random.SeedSequence(master_seed).spawn(NODE_STREAM_BASE + n_nodes)

    def seed(self, stream: int) -> int:
        """Return a 32-bit integer seed for APIs that take plain ints."""
        return int(self._children[stream].generate_state(1)[0])

    def generator(self, stream: int) -> np.random.Generator:
        """Return a fresh generator for one stream."""
        return np.random.default_rng(self._children[stream])

    def node_generator(self, node: int) -> np.random.Generator:
        return self.generator(NODE_STREAM_BASE + node)
