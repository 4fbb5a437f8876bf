"""
Tests for the experiment commands, option parsing and the comparison service.

Run with:
    python manage.py test apps.experiments --exclude-tag slow --settings=gridwalk.settings.test
"""

import hashlib
import io
import os
import tempfile
from pathlib import Path

from django.core.management import CommandError, call_command
from django.test import SimpleTestCase, TestCase

from apps.experiments.models import ExperimentRun
from apps.experiments.options import crash_list, int_list, method_list
from apps.experiments.services import compare, read_csv
from apps.experiments.sweeps import ExperimentSpec, read_config_file
from apps.metrics.metrics import CSV_COLUMNS
from apps.protocol.messages import Method
from core.exceptions import InvalidParameterError

SMALL = ["--nodes", "6", "--tasks", "12", "--topology", "random:0.4", "--mu", "2.3"]


def call(name: str, *args) -> tuple[str, str]:
    """Run a management command, returning (stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    call_command(name, *args, stdout=out, stderr=err)
    return out.getvalue(), err.getvalue()


class OptionParsingTests(SimpleTestCase):
    def test_int_list_ranges_are_inclusive(self):
        self.assertEqual(int_list("100:1000:100"), list(range(100, 1001, 100)))
        self.assertEqual(int_list("5,10:20:5,40"), [5, 10, 15, 20, 40])

    def test_int_list_rejects_garbage(self):
        for value in ("", "a", "1:2", "10:20:0", "1:x:2"):
            with self.subTest(value=value), self.assertRaises(InvalidParameterError):
                int_list(value)

    def test_method_list_keeps_order_and_drops_duplicates(self):
        self.assertEqual(method_list("dm,Active,dm"), [Method.DM, Method.ACTIVE])
        with self.assertRaises(InvalidParameterError):
            method_list("dm,foo")

    def test_crash_list(self):
        self.assertEqual(crash_list("10@3, 20.5@4"), [(10.0, 3), (20.5, 4)])


class ExperimentSpecTests(SimpleTestCase):
    def test_sweep_cell_count(self):
        spec = ExperimentSpec.from_options(
            {"methods": method_list("active,dm"), "nodes": [100], "tasks": int_list("100:1000:100"), "reps": 5}
        )
        self.assertEqual(len(spec), 2 * 10 * 5)
        self.assertEqual(len(spec.cells()), 100)

    def test_repetitions_use_consecutive_seeds(self):
        spec = ExperimentSpec.from_options({"nodes": [10], "tasks": [20], "reps": 3, "seed": 7})
        self.assertEqual([c.seed for c in spec.cells()], [7, 8, 9])
        self.assertEqual({c.method for c in spec.cells()}, {"dm"})

    def test_defaults_come_from_settings(self):
        config = ExperimentSpec.from_options({"nodes": [10], "tasks": [20]}).cells()[0].to_config()
        self.assertEqual(config.method.c_r, 1000)
        self.assertEqual(config.method.m_r, 1500)
        self.assertEqual(config.seed, 1)

    def test_missing_nodes(self):
        with self.assertRaises(InvalidParameterError):
            ExperimentSpec.from_options({"tasks": [20]})

    def test_zero_reps_rejected(self):
        with self.assertRaises(InvalidParameterError):
            ExperimentSpec(methods=(Method.DM,), nodes=(10,), tasks=(10,), reps=0)


class ConfigFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / "desk.env"
        self.path.write_text(
            "# desk-scale sweep\nmethods=active,dm\nnodes=10\ntasks=10:30:10\nreps=2\ncr=500\nclaim_grace=5\n",
            encoding="utf-8",
        )

    def test_values_are_parsed(self):
        values = read_config_file(self.path)
        self.assertEqual(values["methods"], [Method.ACTIVE, Method.DM])
        self.assertEqual(values["tasks"], [10, 20, 30])
        self.assertEqual(values["cr"], 500.0)
        self.assertNotIn("nodes", os.environ)
        self.assertNotIn("cr", os.environ)

    def test_flags_override_file(self):
        spec = ExperimentSpec.from_options({"config": str(self.path), "reps": 4, "nodes": [7]})
        self.assertEqual(spec.reps, 4)
        self.assertEqual(spec.nodes, (7,))
        self.assertEqual(spec.c_r, 500.0)
        self.assertEqual(spec.claim_grace, 5.0)

    def test_unknown_key(self):
        self.path.write_text("nodes=10\ncolour=blue\n", encoding="utf-8")
        with self.assertRaisesMessage(InvalidParameterError, "unknown key 'colour'"):
            read_config_file(self.path)

    def test_missing_file(self):
        with self.assertRaises(InvalidParameterError):
            read_config_file(Path(self.tmp.name) / "nope.env")


class RunCommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_single_run_writes_one_row(self):
        out, err = call("run", "--method", "dm", *SMALL, "--seed", "1")
        lines = out.splitlines()
        self.assertEqual(lines[0], ",".join(CSV_COLUMNS))
        self.assertEqual(len(lines), 2)
        self.assertTrue(lines[1].startswith("dm,6,12,1,1000.000000,1500.000000,"))
        self.assertIn("sha256=", err)

    def test_output_is_deterministic(self):
        first, _ = call("run", "--method", "df", *SMALL, "--seed", "3", "--reps", "2")
        second, _ = call("run", "--method", "df", *SMALL, "--seed", "3", "--reps", "2")
        self.assertEqual(first, second)

    def test_out_file_and_console_summary(self):
        target = self.dir / "runs.csv"
        out, _ = call("run", "--method", "active", *SMALL, "--reps", "3", "--out", str(target))
        self.assertEqual(len(target.read_text(encoding="utf-8").splitlines()), 4)
        self.assertIn("active n=6 tasks=12", out)
        self.assertIn("Wrote 3 rows", out)

    def test_trace_and_dumps(self):
        trace, tree, views = self.dir / "run.trace", self.dir / "tree.txt", self.dir / "views"
        _, err = call(
            "run", "--method", "dm", *SMALL, "--cr", "1", "--mr", "2",
            "--trace", str(trace), "--dump-tree", str(tree), "--dump-views", str(views),
        )
        body = trace.read_text(encoding="utf-8").split("\n", 1)[1]
        self.assertIn(f"sha256={hashlib.sha256(body.encode()).hexdigest()}", err)
        self.assertTrue(tree.read_text(encoding="utf-8").strip())
        self.assertEqual(len(list(views.glob("node-*.csv"))), 6)

    def test_trace_needs_a_single_run(self):
        with self.assertRaises(CommandError):
            call("run", *SMALL, "--reps", "2", "--trace", str(self.dir / "x.trace"))

    def test_invalid_parameters_become_command_errors(self):
        for args in (
            ["--nodes", "6", "--tasks", "0"],
            ["--method", "xx", "--nodes", "6", "--tasks", "5"],
            [*SMALL, "--crash", "0@0"],
            [*SMALL, "--topology", "hypercube"],
        ):
            with self.subTest(args=args), self.assertRaises(CommandError):
                call("run", *args)

    def test_save_stores_rows(self):
        call("run", "--method", "ds", *SMALL, "--reps", "2", "--save", "--label", "unit")
        runs = ExperimentRun.objects.filter(label="unit")
        self.assertEqual(runs.count(), 2)
        self.assertEqual(sorted(r.seed for r in runs), [1, 2])
        self.assertEqual(len(runs[0].trace_hash), 64)

    def test_config_file(self):
        config = self.dir / "exp.env"
        config.write_text("method=active\nnodes=6\ntasks=12\ntopology=ring\nreps=2\n", encoding="utf-8")
        out, _ = call("run", "--config", str(config), "--reps", "1")
        rows = out.splitlines()[1:]
        self.assertEqual(len(rows), 1)
        self.assertTrue(rows[0].startswith("active,6,12,"))


class SweepCommandTests(TestCase):
    ARGS = ["--methods", "active,dm", "--nodes", "5", "--tasks", "5:20:5", "--reps", "2", "--topology", "complete",
            "--mu", "2.3"]

    def test_row_count_and_order(self):
        out, _ = call("sweep", *self.ARGS)
        rows = [r.split(",") for r in out.splitlines()[1:]]
        self.assertEqual(len(rows), 2 * 4 * 2)
        self.assertEqual([r[0] for r in rows], ["active"] * 8 + ["dm"] * 8)
        self.assertEqual([int(r[2]) for r in rows[:8]], [5, 5, 10, 10, 15, 15, 20, 20])

    def test_celery_backend_matches_inline(self):
        inline, _ = call("sweep", *self.ARGS)
        celery, _ = call("sweep", *self.ARGS, "--backend", "celery")
        self.assertEqual(inline, celery)


class CompareTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.csv = Path(self.tmp.name) / "sweep.csv"

    def sweep(self, methods: str, *extra):
        call("sweep", "--methods", methods, *SMALL, "--reps", "3", "--out", str(self.csv), *extra)

    def test_table(self):
        self.sweep("active,dm")
        out, _ = call("compare", str(self.csv))
        self.assertIn("dm vs active", out)
        self.assertIn("msg_ratio", out)
        self.assertEqual(len(out.splitlines()), 3)

    def test_identical_methods(self):
        self.sweep("dm")
        with open(self.csv, encoding="utf-8", newline="") as fh:
            runs = read_csv(fh)
        (row,) = compare(runs, baseline="dm", candidate="dm")
        self.assertEqual(row.efficiency_delta, 0.0)
        self.assertEqual(row.message_ratio, 1.0)
        self.assertEqual(row.replication_ratio, 1.0)

    def test_missing_baseline(self):
        self.sweep("dm")
        with self.assertRaisesMessage(CommandError, "missing baseline"):
            call("compare", str(self.csv))

    def test_malformed_csv_names_the_line(self):
        self.csv.write_text(",".join(CSV_COLUMNS) + "\ndm,6,twelve,1,1,1,1,1,1,1,1,1,1,\n", encoding="utf-8")
        with self.assertRaisesMessage(CommandError, "line 2"):
            call("compare", str(self.csv))

    def test_from_db(self):
        self.sweep("active,dm", "--save", "--label", "cmp")
        out, _ = call("compare", "--from-db", "--label", "cmp")
        self.assertIn("(database)", out)
        self.assertEqual(len(out.splitlines()), 3)

    def test_needs_exactly_one_source(self):
        with self.assertRaises(CommandError):
            call("compare")
