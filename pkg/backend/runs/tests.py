import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, tag

from evaluation.fixtures import REFERENCE_TEXT
from privacy.ledger import verify_composition
from runs.manifest import AtomicOutputs, sha256_file
from runs.models import PublishRun
from trajectories.fileformat import parse_dataset


class Command_Test_Base(TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)
        self.reference = self.write("reference.traj", REFERENCE_TEXT)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def run_command(self, name, *args):
        out = StringIO()
        call_command(name, *[str(a) for a in args], stdout=out, stderr=StringIO())
        return out.getvalue()

    def assertExitCode(self, code, name, *args):
        with self.assertRaises(CommandError) as cm:
            self.run_command(name, *args)
        self.assertEqual(cm.exception.returncode, code, str(cm.exception))
        return cm.exception


# Publish
class Publish_Command_Test(Command_Test_Base):
    def publish_args(self, **overrides):
        flags = {"--in": self.reference, "--out": self.dir / "pub.traj", "--eps": 1.0, "--h": 3,
                 "--theta": 2, "--seed": 7}
        flags.update(overrides)
        return [x for pair in flags.items() for x in pair]

    def test_publish_pass(self):
        self.run_command("publish", *self.publish_args())
        out = self.dir / "pub.traj"
        published = parse_dataset(out.read_text(encoding="utf-8"))
        self.assertEqual(published.universe, parse_dataset(REFERENCE_TEXT).universe)

        manifest = json.loads((self.dir / "pub.traj.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["command"], "publish")
        self.assertEqual(manifest["seed"], 7)
        self.assertEqual(manifest["config"]["theta_override"], 2.0)
        self.assertLessEqual(manifest["ledger"]["max_path_sum"], 1.0 + 1e-9)
        self.assertTrue(manifest["ledger"]["passed"])
        for entry in manifest["inputs"] + manifest["outputs"]:
            self.assertEqual(sha256_file(entry["path"]), entry["sha256"])

        ledger_lines = (self.dir / "pub.traj.ledger").read_text(encoding="utf-8").splitlines()
        self.assertTrue(ledger_lines[0].startswith("global/pre-length\tpre-length\t"))

        run = PublishRun.objects.get()
        self.assertEqual(run.seed, 7)
        self.assertEqual(run.published_count, len(published))

    def test_publish_deterministic_pass(self):
        names = ("pub.traj", "pub.traj.ledger", "pub.traj.manifest.json")
        self.run_command("publish", *self.publish_args())
        first = [(self.dir / n).read_bytes() for n in names]
        self.run_command("publish", *self.publish_args())
        second = [(self.dir / n).read_bytes() for n in names]
        self.assertEqual(first, second)

    def test_publish_baseline_pass(self):
        self.run_command("publish", *self.publish_args(**{"--mechanism": "baseline", "--tree": self.dir / "t.txt"}))
        self.assertTrue((self.dir / "t.txt").read_text(encoding="utf-8").startswith("root c="))

    def test_config_file_pass(self):
        cfg = self.write("aptb.conf", "total_eps = 0.5\nh_user = 2\n")
        self.run_command("publish", "--in", self.reference, "--out", self.dir / "p.traj", "--config", cfg, "--seed", 1)
        manifest = json.loads((self.dir / "p.traj.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["config"]["total_eps"], 0.5)
        self.assertEqual(manifest["config"]["h_user"], 2)

    def test_zero_epsilon_fail(self):
        exc = self.assertExitCode(2, "publish", *self.publish_args(**{"--eps": 0}))
        self.assertIn("total_eps", str(exc))
        self.assertFalse((self.dir / "pub.traj").exists())

    def test_bad_input_fail(self):
        self.assertExitCode(3, "publish", *self.publish_args(**{"--in": self.dir / "missing.traj"}))
        bad = self.write("bad.traj", "universe rows=1 cols=2 slots=2\n0:0 9:1\n")
        exc = self.assertExitCode(3, "publish", *self.publish_args(**{"--in": bad}))
        self.assertIn("line 2", str(exc))

    def test_audit_failure_withholds_output_fail(self):
        def strict(ledger, tree, total):
            return verify_composition(ledger, tree, total / 2)

        with mock.patch("aptb.publisher.verify_composition", side_effect=strict):
            self.assertExitCode(4, "publish", *self.publish_args())
        self.assertEqual(sorted(p.name for p in self.dir.iterdir()), ["reference.traj"])
        self.assertEqual(PublishRun.objects.count(), 0)


# Evaluation
class Eval_Command_Test(Command_Test_Base):
    def test_identical_files_pass(self):
        report = self.dir / "report.txt"
        summary = self.dir / "summary.tsv"
        self.run_command("eval", "--in", self.reference, "--published", self.reference, "--seed", 1,
                         "--out", report, "--summary", summary)
        text = report.read_text(encoding="utf-8")
        self.assertIn("avg_relative_error = 0.0\n", text)
        self.assertIn("length_l1 = 0.0\n", text)
        self.assertEqual(summary.read_text(encoding="utf-8").splitlines()[0], "avg_relative_error\tpublished\t-\t1\t0.0")

    def test_sweep_rows_pass(self):
        data = self.dir / "synth.traj"
        self.run_command("synth", "--rows", 2, "--cols", 2, "--slots", 3, "--n", 30, "--seed", 4, "--out", data)
        summary = self.dir / "summary.tsv"
        self.run_command("eval", "--in", data, "--sweep", "eps=0.5,1.0", "--mechanism", "aptb,baseline",
                         "--seeds", 20, "--seed", 0, "--h", 3, "--delta", 0,
                         "--out", self.dir / "r.txt", "--summary", summary)
        rows = summary.read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(rows), 2 * 2 * 20)
        self.assertEqual(rows[0].split("\t")[:4], ["avg_relative_error", "aptb", "0.5", "0"])
        report = (self.dir / "r.txt").read_text(encoding="utf-8")
        self.assertIn("[sign_test]", report)

    def test_missing_published_fail(self):
        self.assertExitCode(3, "eval", "--in", self.reference, "--published", self.dir / "nope.traj",
                            "--seed", 1, "--out", self.dir / "r.txt")
        self.assertFalse((self.dir / "r.txt").exists())

    def test_bad_sweep_fail(self):
        self.assertExitCode(2, "eval", "--in", self.reference, "--sweep", "eps=-1", "--seed", 1,
                            "--out", self.dir / "r.txt")
        self.assertExitCode(2, "eval", "--in", self.reference, "--seed", 1, "--out", self.dir / "r.txt")


# Empirical DP check
class Dpcheck_Command_Test(Command_Test_Base):
    def test_too_few_trials_fail(self):
        self.assertExitCode(2, "dpcheck", "--fixture", "pair-chain", "--eps", 1.0, "--seed", 0, "--trials", 100)

    def test_dataset_too_large_fail(self):
        self.assertExitCode(2, "dpcheck", "--in", self.reference, "--eps", 1.0, "--seed", 0, "--trials", 10_000)

    @tag("slow")
    def test_fixture_pass(self):
        report = self.dir / "dp.txt"
        self.run_command("dpcheck", "--fixture", "pair-chain", "--eps", 1.0, "--seed", 0,
                         "--trials", 100_000, "--out", report)
        self.assertIn("pass = true", report.read_text(encoding="utf-8"))

    @tag("slow")
    def test_fault_injection_fail(self):
        self.assertExitCode(5, "dpcheck", "--fixture", "pair-chain", "--eps", 1.0, "--seed", 0,
                            "--trials", 100_000, "--inject-fault", 50)


# Synthetic data and discretization
class Synth_Command_Test(Command_Test_Base):
    def test_deterministic_pass(self):
        a, b = self.dir / "a.traj", self.dir / "b.traj"
        for path in (a, b):
            self.run_command("synth", "--rows", 5, "--cols", 4, "--slots", 4, "--n", 2000, "--seed", 1, "--out", path)
        self.assertEqual(sha256_file(a), sha256_file(b))
        self.assertEqual(len(parse_dataset(a.read_text(encoding="utf-8"))), 2000)

    def test_empty_pass(self):
        path = self.dir / "empty.traj"
        self.run_command("synth", "--rows", 2, "--cols", 2, "--slots", 2, "--n", 0, "--seed", 1, "--out", path)
        self.assertEqual(path.read_text(encoding="utf-8"), "universe rows=2 cols=2 slots=2\n")

    def test_negative_sizes_fail(self):
        self.assertExitCode(2, "synth", "--rows", -5, "--cols", 4, "--slots", 4, "--n", 10, "--seed", 1,
                            "--out", self.dir / "x.traj")
        self.assertExitCode(2, "synth", "--rows", 5, "--cols", 4, "--slots", 4, "--n", -10, "--seed", 1,
                            "--out", self.dir / "x.traj")

    def test_discretize_pass(self):
        raw = self.write("raw.csv", "0.5,0.5,2024-01-01T00:00:00Z\n1.5,1.5,2024-01-01T00:00:20Z\n\n9,9,0\n")
        out = self.dir / "grid.traj"
        self.run_command("discretize", "--in", raw, "--out", out, "--rows", 2, "--cols", 2, "--slots", 3,
                         "--bbox", "0,0,2,2", "--time-origin", "2024-01-01T00:00:00Z", "--slot-width", 10)
        self.assertEqual(out.read_text(encoding="utf-8"), "universe rows=2 cols=2 slots=3\n0:0 3:2\n")

    def test_discretize_fail(self):
        raw = self.write("raw.csv", "0.5,0.5,0\n")
        self.assertExitCode(2, "discretize", "--in", raw, "--out", self.dir / "g.traj", "--rows", 2, "--cols", 2,
                            "--slots", 3, "--bbox", "2,2,0,0", "--time-origin", 0, "--slot-width", 10)


# Atomic writes
class Atomic_Outputs_Test(Command_Test_Base):
    def test_commit_pass(self):
        target = self.dir / "a.txt"
        with AtomicOutputs() as outputs:
            outputs.stage(target, "hello\n")
            self.assertFalse(target.exists())
            outputs.commit()
        self.assertEqual(target.read_text(encoding="utf-8"), "hello\n")

    def test_error_leaves_nothing_fail(self):
        with self.assertRaises(RuntimeError):
            with AtomicOutputs() as outputs:
                outputs.stage(self.dir / "a.txt", "hello\n")
                raise RuntimeError("boom")
        self.assertEqual(sorted(p.name for p in self.dir.iterdir()), ["reference.traj"])
