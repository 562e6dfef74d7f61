import math

import numpy as np
from django.test import SimpleTestCase, tag

from privacy.exceptions import LedgerMismatchError, check_epsilon
from privacy.ledger import (
    PURPOSE_COUNT,
    PURPOSE_PRE_LENGTH,
    PURPOSE_RANK,
    BudgetLedger,
    charge,
    verify_composition,
)
from privacy.mechanisms import (
    RandomStream,
    exp_mechanism,
    exp_probabilities,
    laplace,
    laplace_from_uniform,
    laplace_tail,
)
from trajectories.exceptions import PreconditionError
from trajectories.fileformat import parse_dataset
from trajectories.prefix_tree import build_real_tree


# Seeded streams
class Random_Stream_Test(SimpleTestCase):
    def test_same_seed_same_draws_pass(self):
        a, b = RandomStream(42), RandomStream(42)
        self.assertEqual([a.uniform_open() for _ in range(5)], [b.uniform_open() for _ in range(5)])

    def test_split_pass(self):
        child = RandomStream(42).split(3)
        self.assertEqual(child.seed, 45)
        self.assertEqual(child.uniform_open(), RandomStream(45).uniform_open())

    def test_epsilon_fail(self):
        for bad in (0, -1.0, math.inf, "abc"):
            with self.assertRaises(PreconditionError):
                check_epsilon(bad)
        self.assertEqual(check_epsilon(1), 1.0)


# Laplace noise
class Laplace_Test(SimpleTestCase):
    def test_inverse_cdf_pass(self):
        self.assertAlmostEqual(laplace_from_uniform(0.9, 1.0), 1.6094, places=4)
        self.assertAlmostEqual(laplace_from_uniform(0.1, 1.0), -1.6094, places=4)
        self.assertEqual(laplace_from_uniform(0.5, 3.0), 0.0)

    def test_degenerate_stream_pass(self):
        self.assertEqual(laplace(10.0, RandomStream(1, degenerate=True)), 0.0)

    def test_scale_fail(self):
        with self.assertRaises(PreconditionError):
            laplace(0.0, RandomStream(1))

    def test_tail_pass(self):
        self.assertAlmostEqual(laplace_tail(0.5, math.log(4) / 0.5), 0.125)

    @tag("slow")
    def test_empirical_moments_pass(self):
        rng = RandomStream(7)
        draws = np.array([laplace(2.0, rng) for _ in range(100_000)])
        self.assertAlmostEqual(float(np.mean(np.abs(draws))), 2.0, delta=0.05)
        self.assertAlmostEqual(float(np.mean(draws)), 0.0, delta=0.05)
        # tail frequency against the closed form, within 5% relative
        theta = 2.0
        observed = float(np.mean(draws / 2.0 > theta))
        self.assertAlmostEqual(observed / laplace_tail(1.0, theta), 1.0, delta=0.05)


# Exponential mechanism
class Exponential_Mechanism_Test(SimpleTestCase):
    def test_probabilities_pass(self):
        p = exp_probabilities([0.0, -1.0], 2.0, 1.0)
        self.assertAlmostEqual(p[0], 0.7311, places=4)
        self.assertAlmostEqual(p[1], 0.2689, places=4)

    def test_large_scores_stay_finite_pass(self):
        p = exp_probabilities([-5000.0, -5001.0], 2.0, 1.0)
        self.assertTrue(np.all(np.isfinite(p)))
        self.assertAlmostEqual(p[0], 0.7311, places=4)

    def test_single_candidate_pass(self):
        self.assertEqual(exp_mechanism([-3.0], 1.0, 1.0, RandomStream(0)), 0)

    def test_degenerate_picks_best_pass(self):
        self.assertEqual(exp_mechanism([-2.0, -0.5, -0.5], 1.0, 1.0, RandomStream(0, degenerate=True)), 1)

    def test_no_candidates_fail(self):
        with self.assertRaises(PreconditionError):
            exp_mechanism([], 1.0, 1.0, RandomStream(0))

    @tag("slow")
    def test_selection_frequencies_pass(self):
        cases = [
            ([0.0, -1.0], 2.0),
            ([0.0, 0.0, 0.0], 1.0),
            ([-0.5, 0.0, -2.0, -1.0], 1.0),
        ]
        for scores, eps in cases:
            rng = RandomStream(11)
            picks = np.bincount([exp_mechanism(scores, eps, 1.0, rng) for _ in range(100_000)],
                                minlength=len(scores)) / 100_000
            expected = exp_probabilities(scores, eps, 1.0)
            for got, want in zip(picks, expected):
                self.assertAlmostEqual(got, want, delta=0.01)


# Ledger and composition audit
class Budget_Ledger_Test(SimpleTestCase):
    def setUp(self):
        d = parse_dataset("universe rows=1 cols=2 slots=2\n0:0 1:1\n1:0\n")
        self.tree = build_real_tree(d, 2)

    def test_totals_and_export_pass(self):
        ledger = BudgetLedger()
        self.assertIs(charge(ledger, "global/pre-length", 0.05, PURPOSE_PRE_LENGTH), ledger)
        ledger.charge("root/0:0", 0.25, PURPOSE_RANK).charge("root/0:0", 0.5, PURPOSE_COUNT)
        self.assertEqual(len(ledger), 3)
        self.assertAlmostEqual(ledger.global_total(), 0.05)
        self.assertEqual(ledger.per_scope_totals(), {"root/0:0": 0.75})
        self.assertEqual(ledger.per_purpose_totals()[PURPOSE_COUNT], 0.5)
        self.assertEqual(
            ledger.export(),
            "global/pre-length\tpre-length\t0.05\nroot/0:0\trank\t0.25\nroot/0:0\tcount\t0.5\n",
        )

    def test_charge_fail(self):
        with self.assertRaises(ValueError):
            BudgetLedger().charge("root/0:0", 0.1, "gossip")
        with self.assertRaises(PreconditionError):
            BudgetLedger().charge("root/0:0", 0.0, PURPOSE_COUNT)

    def test_audit_pass(self):
        ledger = BudgetLedger()
        ledger.charge("global/pre-length", 0.1, PURPOSE_PRE_LENGTH)
        ledger.charge("root/0:0", 0.5, PURPOSE_COUNT)
        ledger.charge("root/0:0/1:1", 0.4, PURPOSE_COUNT)
        report = verify_composition(ledger, self.tree, 1.0)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.max_path_sum, 1.0)
        self.assertEqual(report.worst_path, "root/0:0/1:1")
        self.assertEqual(len(report.path_sums), 2)
        self.assertEqual(report.summary()["paths"], 2)

    def test_audit_fail(self):
        ledger = BudgetLedger()
        ledger.charge("global/pre-length", 0.1, PURPOSE_PRE_LENGTH)
        ledger.charge("root/0:0", 0.5, PURPOSE_COUNT)
        ledger.charge("root/0:0/1:1", 0.41, PURPOSE_COUNT)
        report = verify_composition(ledger, self.tree, 1.0)
        self.assertFalse(report.passed)
        self.assertEqual(report.failures, ["root/0:0/1:1"])

    def test_unknown_scope_fail(self):
        ledger = BudgetLedger().charge("root/1:1", 0.1, PURPOSE_COUNT)
        with self.assertRaises(LedgerMismatchError):
            verify_composition(ledger, self.tree, 1.0)
