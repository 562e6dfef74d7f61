import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, tag
from scipy import stats

from aptb.config import AptbConfig
from evaluation.baseline import build_baseline_tree
from evaluation.dpcheck import check_tiny, empirical_dp_check
from evaluation.fixtures import TINY_FIXTURES, reference_dataset, tiny_fixture
from evaluation.harness import (
    MECHANISM_APTB,
    MECHANISM_BASELINE,
    METRIC_ARE,
    METRIC_LENGTH_L1,
    SummaryRow,
    parse_mechanisms,
    rows_for,
    run_mechanism,
    run_sweep,
)
from evaluation.metrics import (
    QueryWorkload,
    avg_relative_error,
    length_distribution_l1,
    make_workload,
    sign_test,
)
from evaluation.serializers import SweepSerializer, SynthSerializer
from evaluation.synth import popularity_weights, synth_dataset
from privacy.ledger import verify_composition
from privacy.mechanisms import RandomStream
from trajectories.dataset import Dataset, STPoint, Trajectory, Universe, brute_force_prefix_count
from trajectories.exceptions import PreconditionError
from trajectories.fileformat import parse_dataset
from trajectories.prefix_tree import build_real_tree, dump_tree


def repeat(universe, rows):
    """rows: [(trajectory text, copies)]"""
    text = "".join(f"{line}\n" * copies for line, copies in rows)
    return parse_dataset(text, universe)


# Uniform-budget baseline
class Baseline_Tree_Test(SimpleTestCase):
    def test_zero_noise_pass(self):
        d = reference_dataset()
        cfg = AptbConfig(total_eps=1.0, h_user=3, theta_override=1.0)
        tree, _ = build_baseline_tree(d, 1.0, 3, RandomStream(0, degenerate=True), cfg)
        exact = build_real_tree(d, 3)
        self.assertEqual(tree.root.count, 15)
        for node in exact.iter_nodes():
            self.assertEqual(tree.find(node.path()).count, node.count)

    def test_path_budget_pass(self):
        tree, ledger = build_baseline_tree(reference_dataset(), 1.0, 3, RandomStream(0, degenerate=True),
                                           AptbConfig(total_eps=1.0, h_user=3, theta_override=1.0))
        for scope, total in ledger.per_scope_totals().items():
            self.assertAlmostEqual(total, 1.0 / 3, msg=scope)
        report = verify_composition(ledger, tree, 1.0)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.max_path_sum, 1.0)

    def test_deterministic_pass(self):
        a, _ = build_baseline_tree(reference_dataset(), 1.0, 3, RandomStream(7))
        b, _ = build_baseline_tree(reference_dataset(), 1.0, 3, RandomStream(7))
        self.assertEqual(dump_tree(a), dump_tree(b))

    def test_baseline_fail(self):
        with self.assertRaises(PreconditionError):
            build_baseline_tree(reference_dataset(), 1.0, 0, RandomStream(0))
        with self.assertRaises(PreconditionError):
            build_baseline_tree(reference_dataset(), 0.0, 3, RandomStream(0))


# Utility metrics
class Metrics_Test(SimpleTestCase):
    def setUp(self):
        self.u = Universe(1, 3, 3)

    def test_relative_error_pass(self):
        original = repeat(self.u, [("0:0", 10), ("1:0", 990)])
        published = repeat(self.u, [("0:0", 8), ("1:0", 990), ("2:0", 1)])
        self.assertAlmostEqual(avg_relative_error(original, published, QueryWorkload(((STPoint(0, 0),),))), 0.2)
        # zero true count: the denominator falls back to s * |D| = 1
        self.assertAlmostEqual(avg_relative_error(original, published, QueryWorkload(((STPoint(2, 0),),))), 1.0)

    def test_relative_error_identical_pass(self):
        d = reference_dataset()
        w = make_workload(d, 3, RandomStream(1))
        self.assertEqual(avg_relative_error(d, d, w), 0.0)

    def test_relative_error_fail(self):
        d = reference_dataset()
        with self.assertRaises(PreconditionError):
            avg_relative_error(d, d, QueryWorkload(()))

    def test_length_distance_pass(self):
        original = repeat(self.u, [("0:0 1:1", 10), ("0:0 1:1 2:2", 5)])
        published = repeat(self.u, [("0:0 1:1", 12), ("0:0 1:1 2:2", 4)])
        self.assertAlmostEqual(length_distribution_l1(original, published), 1 / 6, places=4)
        self.assertEqual(length_distribution_l1(original, original), 0.0)
        longer = repeat(self.u, [("0:0 1:1 2:2", 3)])
        shorter = repeat(self.u, [("0:0 1:1", 3)])
        self.assertAlmostEqual(length_distribution_l1(shorter, longer), 2.0)

    def test_length_distance_fail(self):
        with self.assertRaises(PreconditionError):
            length_distribution_l1(reference_dataset(), Dataset(reference_dataset().universe))

    def test_workload_pass(self):
        d = reference_dataset()
        w = make_workload(d, 3, RandomStream(4))
        present = [p for p in w.prefixes if brute_force_prefix_count(d, p) > 0]
        absent = [p for p in w.prefixes if brute_force_prefix_count(d, p) == 0]
        nodes = sum(1 for n in build_real_tree(d, 3).iter_nodes()) - 1
        self.assertEqual(len(present), nodes)
        self.assertEqual(len(absent), nodes)
        self.assertEqual(len(set(w.prefixes)), len(w.prefixes))
        for p in w.prefixes:
            self.assertTrue(1 <= len(p) <= 3)
            Trajectory(p)  # slots strictly increase
        self.assertEqual(make_workload(d, 3, RandomStream(4)), w)

    def test_sign_test_pass(self):
        self.assertAlmostEqual(sign_test([0.1] * 20, [0.2] * 20), 0.5 ** 20)
        self.assertEqual(sign_test([0.1, 0.2], [0.1, 0.2]), 1.0)
        self.assertGreater(sign_test([0.3] * 10, [0.2] * 10), 0.99)

    def test_sign_test_fail(self):
        with self.assertRaises(PreconditionError):
            sign_test([0.1], [0.1, 0.2])


# Synthetic data
class Synth_Test(SimpleTestCase):
    def test_empty_pass(self):
        d = synth_dataset(Universe(5, 4, 4), 0, 4, 1.0, 1)
        self.assertEqual(len(d), 0)

    def test_deterministic_pass(self):
        u = Universe(5, 4, 4)
        a = synth_dataset(u, 500, 4, 1.0, 1)
        self.assertEqual(a, synth_dataset(u, 500, 4, 1.0, 1))
        self.assertNotEqual(a, synth_dataset(u, 500, 4, 1.0, 2))
        self.assertTrue(all(1 <= len(t) <= 4 for t in a))

    def test_skew_favours_first_cells_pass(self):
        weights = popularity_weights(20, 2.0)
        self.assertTrue(np.all(np.diff(weights) < 0))
        self.assertTrue(np.allclose(popularity_weights(20, 0.0), 1 / 20))

    def test_synth_fail(self):
        with self.assertRaises(PreconditionError):
            synth_dataset(Universe(2, 2, 2), -1, 2, 1.0, 0)
        with self.assertRaises(PreconditionError):
            synth_dataset(Universe(2, 2, 2), 5, 0, 1.0, 0)

    @tag("slow")
    def test_uniform_start_cells_pass(self):
        u = Universe(5, 4, 4)
        d = synth_dataset(u, 100_000, 4, 0.0, 3)
        starts = np.bincount([t.points[0].cell for t in d], minlength=u.cell_count)
        self.assertGreater(stats.chisquare(starts).pvalue, 0.001)

    def test_serializer_pass(self):
        ser = SynthSerializer(data={"rows": 5, "cols": 4, "slots": 4, "n": 10, "max_len": None, "skew": 1.0, "seed": 1})
        self.assertTrue(ser.is_valid(), ser.errors)
        self.assertEqual(ser.validated_data["max_len"], 4)

    def test_serializer_fail(self):
        ser = SynthSerializer(data={"rows": 5, "cols": -4, "slots": 4, "n": -1, "seed": 1})
        self.assertFalse(ser.is_valid())
        self.assertEqual(set(ser.errors), {"cols", "n"})


# Mechanism dispatch and sweeps
class Harness_Test(SimpleTestCase):
    def setUp(self):
        self.d = synth_dataset(Universe(2, 2, 3), 40, 3, 1.0, 5)
        self.cfg = AptbConfig(total_eps=1.0, h_user=3, seed=0)

    def test_run_mechanism_pass(self):
        for name in (MECHANISM_APTB, MECHANISM_BASELINE):
            result = run_mechanism(name, self.d, self.cfg)
            self.assertTrue(result.audit.passed, name)
            self.assertEqual(result.dataset.universe, self.d.universe)
        self.assertIsNone(run_mechanism(MECHANISM_BASELINE, self.d, self.cfg).trace)

    def test_run_mechanism_fail(self):
        with self.assertRaises(PreconditionError):
            run_mechanism("laplace-everything", self.d, self.cfg)
        with self.assertRaises(PreconditionError):
            parse_mechanisms("aptb,other")

    def test_sweep_rows_pass(self):
        rows = run_sweep(self.d, (MECHANISM_APTB, MECHANISM_BASELINE), (0.5, 1.0), range(3), self.cfg,
                         metrics=(METRIC_ARE, METRIC_LENGTH_L1))
        self.assertEqual(len(rows), 2 * 2 * 3 * 2)
        first = rows[0]
        self.assertEqual((first.metric, first.mechanism, first.epsilon, first.seed), (METRIC_ARE, MECHANISM_APTB, 0.5, 0))
        self.assertEqual([r.seed for r in rows[:6]], [0, 0, 1, 1, 2, 2])
        self.assertEqual(len(rows_for(rows, METRIC_ARE, MECHANISM_BASELINE, 1.0)), 3)

    def test_summary_line_pass(self):
        self.assertEqual(SummaryRow(METRIC_ARE, MECHANISM_APTB, 0.5, 3, 0.25).as_line(),
                         "avg_relative_error\taptb\t0.5\t3\t0.25")
        self.assertEqual(SummaryRow(METRIC_ARE, "published", None, 3, 0.0).as_line(),
                         "avg_relative_error\tpublished\t-\t3\t0.0")

    def test_sweep_serializer_pass(self):
        ser = SweepSerializer(data={"sweep": "eps=0.5,1.0"})
        self.assertTrue(ser.is_valid(), ser.errors)
        self.assertEqual(ser.validated_data["sweep"], [0.5, 1.0])
        self.assertEqual(ser.validated_data["mechanism"], (MECHANISM_APTB, MECHANISM_BASELINE))
        self.assertEqual(ser.validated_data["seeds"], 20)

    def test_sweep_serializer_fail(self):
        ser = SweepSerializer(data={"sweep": "delta=1", "metrics": "accuracy", "seeds": 0})
        self.assertFalse(ser.is_valid())
        self.assertEqual(set(ser.errors), {"sweep", "metrics", "seeds"})

    @tag("slow")
    def test_workers_match_serial_pass(self):
        serial = run_sweep(self.d, (MECHANISM_APTB,), (1.0,), range(4), self.cfg)
        pooled = run_sweep(self.d, (MECHANISM_APTB,), (1.0,), range(4), self.cfg, workers=2)
        self.assertEqual(serial, pooled)

    @tag("slow")
    def test_aggregation_beats_baseline_pass(self):
        d = synth_dataset(Universe(5, 4, 4), 10_000, 4, 1.0, 1)
        cfg = AptbConfig(total_eps=1.0, h_user=4, delta=0.0, seed=0)
        w = make_workload(d, 4, RandomStream(0), settings.TRAJPUB["SANITY_BOUND"])
        rows = run_sweep(d, (MECHANISM_APTB, MECHANISM_BASELINE), (0.5, 1.0), range(20), cfg, workload=w)
        for eps in (0.5, 1.0):
            aptb = rows_for(rows, METRIC_ARE, MECHANISM_APTB, eps)
            baseline = rows_for(rows, METRIC_ARE, MECHANISM_BASELINE, eps)
            self.assertLessEqual(np.mean(aptb), np.mean(baseline))
            self.assertLess(sign_test(aptb, baseline), 0.05)


# Empirical DP check
class Dp_Check_Test(SimpleTestCase):
    def test_fixtures_are_tiny_pass(self):
        self.assertGreaterEqual(len(TINY_FIXTURES), 5)
        for name in TINY_FIXTURES:
            d, removed = tiny_fixture(name)
            check_tiny(d)
            self.assertTrue(0 <= removed < len(d))

    def test_preconditions_fail(self):
        cfg = AptbConfig(total_eps=1.0, h_user=2)
        with self.assertRaises(PreconditionError):
            empirical_dp_check(reference_dataset(), 0, cfg, 10_000)
        d, removed = tiny_fixture("pair-chain")
        with self.assertRaises(PreconditionError):
            empirical_dp_check(d, removed, cfg, 9_999)

    @tag("slow")
    def test_fixtures_pass(self):
        for name in TINY_FIXTURES:
            d, removed = tiny_fixture(name)
            for eps in (0.5, 1.0):
                cfg = AptbConfig(total_eps=eps, h_user=2, seed=1)
                report = empirical_dp_check(d, removed, cfg, 100_000)
                self.assertTrue(report.passed, f"{name} eps={eps}\n{report.as_text()}")
                self.assertEqual(report.trials, 100_000)

    @tag("slow")
    def test_baseline_pass(self):
        d, removed = tiny_fixture("pair-chain")
        cfg = AptbConfig(total_eps=1.0, h_user=2, seed=1)
        report = empirical_dp_check(d, removed, cfg, 100_000, mechanism=MECHANISM_BASELINE)
        self.assertTrue(report.passed, report.as_text())

    @tag("slow")
    def test_fault_injection_fail(self):
        d, removed = tiny_fixture("pair-chain")
        cfg = AptbConfig(total_eps=1.0, h_user=2, seed=1, unaccounted_eps_factor=50.0)
        report = empirical_dp_check(d, removed, cfg, 100_000)
        self.assertFalse(report.passed)
        self.assertTrue(math.isinf(report.max_observed_ratio) or report.max_observed_ratio > math.e)
