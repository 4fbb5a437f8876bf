"""
Tests for task-state sets: lattice merge, selection, completion and generation.

Run with:
    python manage.py test apps.workload --settings=gridwalk.settings.test
"""

import io
import math
from collections import Counter

import numpy as np
from django.test import SimpleTestCase

from apps.workload.taskset import Task, TaskResult, TaskState, TaskStateSet, generate_tasks
from core.exceptions import InvalidParameterError, InvalidStateError


def make_set(states: dict[int, TaskState], node: int = 0, when: float = 1.0) -> TaskStateSet:
    tasks = TaskStateSet()
    for task_id, state in states.items():
        tasks.add(Task(
            id=task_id,
            emitter=0,
            length=10.0,
            state=state,
            result=TaskResult(node, when) if state is TaskState.COMPUTED else None,
            claimer=node if state is TaskState.IN_PROGRESS else None,
            claimed_at=0.0 if state is TaskState.IN_PROGRESS else None,
        ))
    return tasks


def random_set(rng: np.random.Generator, size: int) -> dict[int, TaskState]:
    ids = rng.choice(2 * size, size=size, replace=False)
    return {int(i): TaskState(int(rng.integers(3))) for i in ids}


class MergeTests(SimpleTestCase):
    def test_merge_into_empty_is_identity(self):
        src = make_set({0: TaskState.UNCOMPUTED, 3: TaskState.COMPUTED})
        merged = TaskStateSet().merge(src)
        self.assertTrue(merged.same_view(src))
        self.assertEqual(merged.ids(), [0, 3])

    def test_greater_state_wins(self):
        dst = make_set({1: TaskState.UNCOMPUTED})
        dst.merge(make_set({1: TaskState.IN_PROGRESS}))
        self.assertEqual(dst.state_of(1), TaskState.IN_PROGRESS)

    def test_lower_state_never_overwrites(self):
        dst = make_set({1: TaskState.COMPUTED})
        dst.merge(make_set({1: TaskState.UNCOMPUTED}))
        self.assertEqual(dst.state_of(1), TaskState.COMPUTED)

    def test_random_pairs_match_per_key_max(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            a, b = random_set(rng, 100), random_set(rng, 100)
            expected = dict(a)
            for task_id, state in b.items():
                expected[task_id] = max(expected.get(task_id, state), state)

            merged = make_set(a).merge(make_set(b))
            self.assertEqual({t: merged.state_of(t) for t in merged}, expected)

    def test_merge_is_idempotent(self):
        rng = np.random.default_rng(7)
        src = make_set(random_set(rng, 60))
        once = TaskStateSet().merge(src)
        twice = once.copy().merge(src)
        self.assertTrue(once.same_view(twice))
        self.assertEqual(twice.divergences, 0)

    def test_tie_keeps_destination_entry(self):
        dst = make_set({5: TaskState.IN_PROGRESS}, node=1)
        dst.merge(make_set({5: TaskState.IN_PROGRESS}, node=2))
        self.assertEqual(dst.get(5).claimer, 1)

    def test_different_results_count_divergence(self):
        dst = make_set({3: TaskState.COMPUTED}, node=1, when=40.0)
        dst.merge(make_set({3: TaskState.COMPUTED}, node=2, when=42.0))
        self.assertEqual(dst.get(3).result, TaskResult(1, 40.0))
        self.assertEqual(dst.divergences, 1)

    def test_copy_resets_divergences(self):
        dst = make_set({3: TaskState.COMPUTED}, node=1)
        dst.merge(make_set({3: TaskState.COMPUTED}, node=2))
        self.assertEqual(dst.copy().divergences, 0)

    def test_merge_grows_to_larger_source(self):
        dst = make_set({0: TaskState.UNCOMPUTED})
        dst.merge(make_set({9: TaskState.UNCOMPUTED}))
        self.assertEqual(dst.ids(), [0, 9])
        self.assertEqual(dst.length_of(9), 10.0)


class SelectTaskTests(SimpleTestCase):
    def test_all_computed_returns_none(self):
        tasks = make_set({i: TaskState.COMPUTED for i in range(4)})
        self.assertIsNone(tasks.select_task(np.random.default_rng(0)))

    def test_single_candidate_is_claimed(self):
        tasks = make_set({0: TaskState.COMPUTED, 7: TaskState.UNCOMPUTED, 8: TaskState.IN_PROGRESS})
        self.assertEqual(tasks.select_task(np.random.default_rng(0), node=3, now=5.0), 7)
        claimed = tasks.get(7)
        self.assertEqual(claimed.state, TaskState.IN_PROGRESS)
        self.assertEqual((claimed.claimer, claimed.claimed_at), (3, 5.0))

    def test_selection_is_uniform(self):
        states = {i: TaskState.COMPUTED for i in range(1000)}
        candidates = list(range(0, 1000, 100))
        states.update({i: TaskState.UNCOMPUTED for i in candidates})
        base = make_set(states)
        rng = np.random.default_rng(99)

        picks = Counter()
        for _ in range(10_000):
            picks[base.copy().select_task(rng)] += 1

        self.assertEqual(set(picks), set(candidates))
        for task_id in candidates:
            self.assertAlmostEqual(picks[task_id] / 10_000, 0.1, delta=0.02)


class ReclaimTaskTests(SimpleTestCase):
    def test_stale_claim_is_reclaimed(self):
        tasks = make_set({0: TaskState.IN_PROGRESS}, node=4)
        # length 10, claimed at 0, grace 5: stale strictly after t=15
        self.assertIsNone(tasks.reclaim_task(np.random.default_rng(0), node=1, now=15.0, grace=5.0))
        self.assertEqual(tasks.reclaim_task(np.random.default_rng(0), node=1, now=15.5, grace=5.0), 0)
        self.assertEqual(tasks.get(0).claimer, 1)

    def test_own_claim_is_never_reclaimed(self):
        tasks = make_set({0: TaskState.IN_PROGRESS}, node=1)
        self.assertIsNone(tasks.reclaim_task(np.random.default_rng(0), node=1, now=1e9, grace=0.0))


class CompleteTaskTests(SimpleTestCase):
    def test_complete_records_result(self):
        tasks = make_set({3: TaskState.IN_PROGRESS})
        tasks.complete_task(3, node=5, now=42.0)
        self.assertEqual(tasks.get(3).state, TaskState.COMPUTED)
        self.assertEqual(tasks.get(3).result, TaskResult(5, 42.0))

    def test_completing_twice_raises(self):
        tasks = make_set({3: TaskState.IN_PROGRESS})
        tasks.complete_task(3, node=5, now=42.0)
        with self.assertRaises(InvalidStateError):
            tasks.complete_task(3, node=5, now=43.0)

    def test_completing_unknown_task_raises(self):
        with self.assertRaises(InvalidStateError):
            TaskStateSet().complete_task(0, node=0, now=0.0)

    def test_all_computed(self):
        tasks = make_set({0: TaskState.IN_PROGRESS, 1: TaskState.COMPUTED})
        self.assertFalse(tasks.all_computed())
        tasks.complete_task(0, node=0, now=1.0)
        self.assertTrue(tasks.all_computed())
        self.assertFalse(TaskStateSet().all_computed())


class GenerateTasksTests(SimpleTestCase):
    def test_ids_and_states(self):
        tasks = generate_tasks(5, emitter=0, mu=1.0, sigma=0.5, seed=1)
        self.assertEqual(tasks.ids(), [0, 1, 2, 3, 4])
        self.assertEqual(tasks.count(TaskState.UNCOMPUTED), 5)
        self.assertTrue(all(tasks.get(t).emitter == 0 for t in tasks))

    def test_zero_sigma_gives_constant_length(self):
        tasks = generate_tasks(20, emitter=0, mu=math.log(100), sigma=0.0, seed=3)
        for task_id in tasks:
            self.assertAlmostEqual(tasks.length_of(task_id), 100.0)

    def test_log_mean_matches_mu(self):
        mu = math.log(100)
        tasks = generate_tasks(10_000, emitter=0, mu=mu, sigma=0.5, seed=11)
        logs = [math.log(tasks.length_of(t)) for t in tasks]
        self.assertAlmostEqual(sum(logs) / len(logs), mu, delta=0.02)

    def test_same_seed_same_lengths(self):
        a = generate_tasks(50, emitter=0, mu=4.0, sigma=0.5, seed=8)
        b = generate_tasks(50, emitter=0, mu=4.0, sigma=0.5, seed=8)
        self.assertTrue(a.same_view(b))
        self.assertEqual([a.length_of(t) for t in a], [b.length_of(t) for t in b])

    def test_invalid_parameters(self):
        with self.assertRaises(InvalidParameterError):
            generate_tasks(0, emitter=0, mu=1.0, sigma=0.5, seed=1)
        with self.assertRaises(InvalidParameterError):
            generate_tasks(3, emitter=0, mu=1.0, sigma=-0.1, seed=1)


class CsvTests(SimpleTestCase):
    def test_header_and_empty_fields(self):
        tasks = make_set({0: TaskState.UNCOMPUTED, 1: TaskState.COMPUTED}, node=2, when=7.5)
        out = io.StringIO()
        tasks.write_csv(out)
        self.assertEqual(
            out.getvalue(),
            "id,emitter,length,state,computed_by,completed_at\n"
            "0,0,10.0,uncomputed,,\n"
            "1,0,10.0,computed,2,7.5\n",
        )

    def test_read_back(self):
        out = io.StringIO()
        make_set({0: TaskState.COMPUTED, 4: TaskState.UNCOMPUTED}, node=1, when=3.25).write_csv(out)
        loaded = TaskStateSet.read_csv(io.StringIO(out.getvalue()))
        self.assertEqual(loaded.ids(), [0, 4])
        self.assertEqual(loaded.get(0).result, TaskResult(1, 3.25))

    def test_malformed_row_names_line(self):
        bad = "id,emitter,length,state,computed_by,completed_at\n0,0,10.0,unknown,,\n"
        with self.assertRaisesMessage(InvalidParameterError, "line 2"):
            TaskStateSet.read_csv(io.StringIO(bad))
