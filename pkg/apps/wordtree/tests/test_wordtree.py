"""
Tests for the circulating word and spanning-tree derivation.

The brute-force oracle below rebuilds the tree from the full, unreduced visit
history: parent(v) is the node visited right after v's last occurrence.
"""

from collections import deque

import numpy as np
from django.test import SimpleTestCase

from apps.grid.topology import generate_topology
from apps.wordtree.wordtree import CirculatingWord, SpanTree
from core.exceptions import InvalidParameterError, InvalidStateError, ProtocolViolationError


def oracle_parents(history: list[int]) -> tuple[int, dict[int, int]]:
    """Root and parent map from the unreduced history."""
    last = {}
    for pos, v in enumerate(history):
        last[v] = pos
    root = history[-1]
    return root, {v: history[pos + 1] for v, pos in last.items() if v != root}


def random_walk(topo, length: int, rng: np.random.Generator) -> list[int]:
    walk = [int(rng.integers(topo.n))]
    for _ in range(length - 1):
        row = topo.neighbors(walk[-1])
        walk.append(int(row[rng.integers(len(row))]))
    return walk


def word_from(history, topo=None) -> CirculatingWord:
    word = CirculatingWord(topo)
    for v in history:
        word.append_visit(v)
    return word


class AppendVisitTests(SimpleTestCase):
    def test_first_visit(self):
        word = CirculatingWord().append_visit(0)
        self.assertEqual(word.visits, [0])
        self.assertEqual(word.holder, 0)

    def test_back_and_forth_keeps_both_ids(self):
        word = word_from([0, 1, 0], generate_topology(2, "complete"))
        self.assertEqual(word.holder, 0)
        self.assertEqual(word.covered(), {0, 1})

    def test_non_neighbour_rejected(self):
        topo = generate_topology(4, "ring")
        word = word_from([0, 1], topo)
        with self.assertRaises(ProtocolViolationError):
            word.append_visit(3)

    def test_repeat_of_holder_rejected(self):
        word = word_from([2])
        with self.assertRaises(ProtocolViolationError):
            word.append_visit(2)

    def test_ring_walk_matches_oracle(self):
        history = [0, 1, 2, 1, 0, 3]
        word = word_from(history, generate_topology(4, "ring"))
        root, parents = oracle_parents(history)
        tree = word.extract_tree()
        self.assertEqual(tree.root, root)
        self.assertEqual(tree.parent, parents)


class ExtractTreeTests(SimpleTestCase):
    def test_single_node(self):
        tree = word_from([5]).extract_tree()
        self.assertEqual(tree.root, 5)
        self.assertEqual(tree.parent, {})
        self.assertEqual(tree.nodes, {5})

    def test_path(self):
        tree = word_from([0, 1, 2]).extract_tree()
        self.assertEqual(tree.root, 2)
        self.assertEqual(tree.parent, {0: 1, 1: 2})

    def test_revisits(self):
        tree = word_from([0, 1, 2, 1, 0, 3]).extract_tree()
        self.assertEqual(tree.root, 3)
        self.assertEqual(tree.parent, {0: 3, 1: 0, 2: 1})

    def test_empty_word_rejected(self):
        with self.assertRaises(InvalidStateError):
            CirculatingWord().extract_tree()

    def test_text_dump(self):
        tree = word_from([0, 1, 2, 1, 0, 3]).extract_tree()
        self.assertEqual(tree.to_text(), "3\n  0\n    1\n      2\n")

    def test_text_dump_children_ascending(self):
        tree = SpanTree.from_parents(0, {4: 0, 2: 0, 3: 2})
        self.assertEqual(tree.to_text(), "0\n  2\n    3\n  4\n")


class RandomWalkPropertyTests(SimpleTestCase):
    """Reduction never changes the derived tree."""

    def test_thousand_random_walks_match_oracle(self):
        rng = np.random.default_rng(2024)
        for trial in range(1000):
            n = int(rng.integers(2, 16))
            topo = generate_topology(n, "random", seed=trial, p=0.3)
            history = random_walk(topo, int(rng.integers(1, 60)), rng)
            word = word_from(history, topo)
            tree = word.extract_tree()

            root, parents = oracle_parents(history)
            self.assertEqual((tree.root, tree.parent), (root, parents), msg=f"trial {trial}")

            # Edge validity and acyclicity
            for v in tree.nodes:
                steps, u = 0, v
                while u != tree.root:
                    self.assertTrue(topo.has_edge(u, tree.parent[u]))
                    u = tree.parent[u]
                    steps += 1
                self.assertLessEqual(steps, len(tree) - 1)

            # Covered set is exactly the distinct ids visited
            self.assertEqual(tree.nodes, set(history))

            # The canonical reduced word is short and yields the same tree
            visits = word.visits
            self.assertLessEqual(len(visits), 2 * len(set(history)) - 1)
            self.assertEqual(visits[-1], word.holder)
            self.assertEqual(oracle_parents(visits), (root, parents))
            for a, b in zip(visits, visits[1:]):
                self.assertTrue(topo.has_edge(a, b))

    def test_coverage_is_monotone_along_a_walk(self):
        rng = np.random.default_rng(9)
        topo = generate_topology(12, "random", seed=4, p=0.2)
        word = CirculatingWord(topo)
        seen = 0
        for v in random_walk(topo, 200, rng):
            word.append_visit(v)
            self.assertGreaterEqual(len(word.extract_tree()), seen)
            seen = len(word.extract_tree())


class SubtreeTests(SimpleTestCase):
    def test_subtree_at_root_is_identity(self):
        tree = word_from([0, 1, 2]).extract_tree()
        self.assertIs(tree.subtree(2), tree)

    def test_subtree_of_path(self):
        tree = word_from([0, 1, 2]).extract_tree()
        sub = tree.subtree(1)
        self.assertEqual(sub.root, 1)
        self.assertEqual(sub.children_of(1), (0,))
        self.assertEqual(sub.nodes, {0, 1})
        self.assertIsNone(sub.parent_of(1))

    def test_subtree_node_set_matches_parent_paths(self):
        rng = np.random.default_rng(20)
        topo = generate_topology(20, "random", seed=20, p=0.15)
        tree = word_from(random_walk(topo, 400, rng), topo).extract_tree()
        for v in tree.nodes:
            expected = set()
            for u in tree.nodes:
                w = u
                while True:
                    if w == v:
                        expected.add(u)
                        break
                    if w == tree.root:
                        break
                    w = tree.parent[w]
            self.assertEqual(tree.subtree(v).nodes, expected)

    def test_uncovered_node_rejected(self):
        tree = word_from([0, 1, 2]).extract_tree()
        with self.assertRaises(InvalidParameterError):
            tree.subtree(7)


class PruneCrashedTests(SimpleTestCase):
    def test_no_dead_nodes(self):
        tree = word_from([0, 1, 2]).extract_tree()
        self.assertEqual(tree.prune_crashed(set()), tree)

    def test_dead_interior_cuts_branch(self):
        tree = word_from([0, 1, 2]).extract_tree()
        pruned = tree.prune_crashed({1})
        self.assertEqual(pruned.nodes, {2})

    def test_dead_root_rejected(self):
        tree = word_from([0, 1, 2]).extract_tree()
        with self.assertRaises(InvalidStateError):
            tree.prune_crashed({2})

    def test_random_tree_matches_bfs_oracle(self):
        rng = np.random.default_rng(33)
        topo = generate_topology(20, "random", seed=33, p=0.15)
        tree = word_from(random_walk(topo, 500, rng), topo).extract_tree()
        others = sorted(tree.nodes - {tree.root})
        dead = {int(x) for x in rng.choice(others, size=3, replace=False)}

        expected = {tree.root}
        queue = deque([tree.root])
        while queue:
            v = queue.popleft()
            for c in tree.children_of(v):
                if c not in dead:
                    expected.add(c)
                    queue.append(c)

        pruned = tree.prune_crashed(dead)
        self.assertEqual(pruned.nodes, expected)
        for v, p in pruned.parent.items():
            self.assertEqual(tree.parent[v], p)
