"""
Tests for topology generation, neighbour lookup and edge-list files.

Run with:
    python manage.py test apps.grid --settings=gridwalk.settings.test
"""

import tempfile
from collections import deque
from pathlib import Path

from django.test import SimpleTestCase

from apps.grid.topology import Topology, generate_topology, parse_topology_option
from core.exceptions import InvalidParameterError


def bfs_reach(topo: Topology, start: int = 0) -> set[int]:
    """Nodes reachable from start, by plain breadth-first search."""
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in topo.adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


class GenerateTopologyTests(SimpleTestCase):
    def test_complete_three_nodes(self):
        topo = generate_topology(3, "complete", seed=123)
        self.assertEqual(topo.adjacency, ((1, 2), (0, 2), (0, 1)))

    def test_ring_four_nodes_is_a_cycle(self):
        topo = generate_topology(4, "ring", seed=5)
        self.assertTrue(all(len(row) == 2 for row in topo.adjacency))
        self.assertEqual(topo.neighbors(2), (1, 3))
        self.assertEqual(len(topo.edges()), 4)

    def test_path_model(self):
        topo = generate_topology(5, "path")
        self.assertEqual(topo.neighbors(0), (1,))
        self.assertEqual(topo.neighbors(2), (1, 3))
        self.assertEqual(topo.neighbors(4), (3,))

    def test_random_fifty_nodes_is_connected(self):
        topo = generate_topology(50, "random", seed=7, p=0.1)
        self.assertEqual(bfs_reach(topo), set(range(50)))

    def test_random_invariants_hold_over_many_seeds(self):
        for seed in range(20):
            topo = generate_topology(15, "random", seed=seed, p=0.05)
            for i, row in enumerate(topo.adjacency):
                self.assertNotIn(i, row)
                self.assertEqual(len(row), len(set(row)))
                for j in row:
                    self.assertIn(i, topo.adjacency[j])
            self.assertEqual(bfs_reach(topo), set(range(15)))

    def test_same_seed_same_topology(self):
        a = generate_topology(60, "random", seed=11, p=0.08)
        b = generate_topology(60, "random", seed=11, p=0.08)
        self.assertEqual(a.adjacency, b.adjacency)

    def test_rejects_fewer_than_two_nodes(self):
        with self.assertRaises(InvalidParameterError):
            generate_topology(1, "ring")

    def test_rejects_bad_probability(self):
        for p in (0.0, -0.2, 1.5, None):
            with self.assertRaises(InvalidParameterError):
                generate_topology(10, "random", seed=1, p=p)

    def test_rejects_unknown_model(self):
        with self.assertRaises(InvalidParameterError):
            generate_topology(10, "star")


class NeighborsTests(SimpleTestCase):
    def test_complete_neighbors(self):
        self.assertEqual(generate_topology(3, "complete").neighbors(0), (1, 2))

    def test_neighbors_match_stored_row_and_are_stable(self):
        topo = generate_topology(50, "random", seed=7, p=0.1)
        again = generate_topology(50, "random", seed=7, p=0.1)
        for k in range(50):
            self.assertEqual(topo.neighbors(k), topo.adjacency[k])
            self.assertEqual(topo.neighbors(k), again.neighbors(k))
            self.assertEqual(list(topo.neighbors(k)), sorted(topo.neighbors(k)))

    def test_unknown_node_rejected(self):
        topo = generate_topology(4, "ring")
        with self.assertRaises(InvalidParameterError):
            topo.neighbors(4)
        with self.assertRaises(InvalidParameterError):
            topo.neighbors(-1)


class TopologyValidationTests(SimpleTestCase):
    def test_asymmetric_rows_rejected(self):
        with self.assertRaises(InvalidParameterError):
            Topology(n=2, adjacency=((1,), ()))

    def test_self_loop_rejected(self):
        with self.assertRaises(InvalidParameterError):
            Topology(n=2, adjacency=((0, 1), (0,)))

    def test_single_node_topology_allowed(self):
        topo = Topology(n=1, adjacency=((),))
        self.assertEqual(topo.neighbors(0), ())
        self.assertTrue(topo.is_connected())

    def test_disconnected_is_detected(self):
        topo = Topology(n=4, adjacency=((1,), (0,), (3,), (2,)))
        self.assertFalse(topo.is_connected())


class EdgeListFileTests(SimpleTestCase):
    def test_dump_then_load(self):
        topo = generate_topology(12, "random", seed=3, p=0.2)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "grid.txt"
            topo.dump(path)
            text = path.read_text().splitlines()
            self.assertEqual(text[0], "n=12")
            self.assertEqual(text[1:], [f"{i} {j}" for i, j in topo.edges()])
            self.assertEqual(Topology.load(path), topo)

    def test_malformed_line_reports_line_number(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.txt"
            path.write_text("n=3\n0 1\n1 x\n")
            with self.assertRaisesMessage(InvalidParameterError, "line 3"):
                Topology.load(path)


class ParseTopologyOptionTests(SimpleTestCase):
    def test_variants(self):
        self.assertEqual(parse_topology_option("ring"), ("ring", None, None))
        self.assertEqual(parse_topology_option("random:0.25"), ("random", 0.25, None))
        self.assertEqual(parse_topology_option("file:/tmp/g.txt"), ("file", None, Path("/tmp/g.txt")))

    def test_random_without_probability_rejected(self):
        with self.assertRaises(InvalidParameterError):
            parse_topology_option("random")
