import math
import random
import statistics

from django.test import SimpleTestCase, override_settings, tag
from rest_framework import serializers

from aptb.builder import (
    BudgetClass,
    Cluster,
    allocate_budget,
    build_noisy_tree,
    cluster_nodes,
    compute_theta,
    noisy_height,
    reconstruct_cluster,
    resolve_delta,
    split_budget,
)
from aptb.config import AptbConfig, config_errors, read_config_file
from aptb.consistency import (
    consistency_violations,
    enforce_consistency,
    generate_dataset,
    terminal_counts,
)
from aptb.publisher import publish
from aptb.serializers import AptbConfigSerializer, build_config
from evaluation.fixtures import PLACE, reference_dataset
from evaluation.synth import synth_dataset
from privacy.ledger import PURPOSE_COUNT, PURPOSE_RANK, PURPOSE_SELECT, BudgetLedger, verify_composition
from privacy.mechanisms import RandomStream
from trajectories.dataset import STPoint, Universe
from trajectories.exceptions import DatasetParseError, PreconditionError
from trajectories.prefix_tree import PrefixTree, TreeNode, build_real_tree


def exact_config(**extra):
    return AptbConfig(total_eps=1.0, h_user=3, delta=0.0, theta_override=1.0, zero_noise=True, **extra)


def manual_tree(root_count, children, universe=None):
    """Root with one level of children: {STPoint: count}."""
    universe = universe or Universe(1, 4, 2)
    root = TreeNode(None, 0, root_count)
    for label, count in children.items():
        root.add_child(label, count)
    return PrefixTree(root, 2, universe)


def random_tree(picker, universe, height, noisy):
    """Noisy trees get arbitrary real counts; otherwise integer counts whose children never exceed the parent."""
    root = TreeNode(None, 0, picker.uniform(-3, 15) if noisy else picker.randint(0, 20))
    stack = [root]
    while stack:
        node = stack.pop()
        if node.depth == height:
            continue
        slot = node.label.slot if node.label is not None else -1
        labels = universe.labels_after(slot)
        remaining = node.count
        for label in picker.sample(labels, picker.randint(0, len(labels))):
            if noisy:
                stack.append(node.add_child(label, picker.uniform(-3, 15)))
            elif remaining > 0:
                count = picker.randint(0, int(remaining))
                remaining -= count
                if count:
                    stack.append(node.add_child(label, count))
    return PrefixTree(root, height, universe)


# Configuration
class Aptb_Config_Test(SimpleTestCase):
    def test_defaults_pass(self):
        cfg = AptbConfig(total_eps=1.0, h_user=3)
        self.assertTrue(cfg.auto_delta)
        self.assertEqual(cfg.split_count, 0.70)
        self.assertNotIn("zero_noise", cfg.snapshot())

    def test_invalid_config_fail(self):
        with self.assertRaises(PreconditionError):
            AptbConfig(total_eps=0.0, h_user=3)
        errors = config_errors({
            "total_eps": 1.0, "h_user": 0, "pre_fraction": 1.0, "delta": -1, "theta_floor": 1.0,
            "theta_override": None, "split_rank": 0.5, "split_select": 0.5, "split_count": 0.5,
            "sonset_mode": "everything",
        })
        self.assertEqual(set(errors), {"h_user", "pre_fraction", "delta", "split_count", "sonset_mode"})

    def test_config_file_pass(self):
        values = read_config_file("# comment\ntotal_eps = 0.5\n\nh_user=4  # trailing\ndelta = auto\n")
        self.assertEqual(values, {"total_eps": "0.5", "h_user": "4", "delta": "auto"})

    def test_config_file_fail(self):
        with self.assertRaises(DatasetParseError) as cm:
            read_config_file("total_eps = 1\nbudget = 3\n")
        self.assertEqual(cm.exception.line_no, 2)

    def test_serializer_pass(self):
        cfg = build_config({"total_eps": "0.5", "h_user": "4", "delta": "2.5"}, {"seed": 9, "total_eps": 1.0, "h_user": None})
        self.assertEqual(cfg.total_eps, 1.0)
        self.assertEqual(cfg.h_user, 4)
        self.assertEqual(cfg.delta, 2.5)
        self.assertEqual(cfg.seed, 9)

    @override_settings(TRAJPUB={
        "PRE_FRACTION": 0.2, "THETA_FLOOR": 0.5, "SPLIT_RANK": 0.1, "SPLIT_SELECT": 0.1, "SPLIT_COUNT": 0.8,
    })
    def test_serializer_defaults_from_settings_pass(self):
        cfg = build_config(None, {"total_eps": 1.0, "h_user": 2, "seed": 0})
        self.assertEqual(cfg.pre_fraction, 0.2)
        self.assertEqual(cfg.split_count, 0.8)

    def test_serializer_fail(self):
        ser = AptbConfigSerializer(data={"total_eps": 0, "h_user": 3, "seed": 1})
        self.assertFalse(ser.is_valid())
        self.assertIn("total_eps", ser.errors)
        with self.assertRaises(serializers.ValidationError):
            build_config(None, {"total_eps": 1.0, "h_user": 3})


# Preprocessing and allocation
class Budget_Split_Test(SimpleTestCase):
    def test_split_pass(self):
        ledger = BudgetLedger()
        eps_len, eps_hist, eps_tree = split_budget(AptbConfig(total_eps=1.0, h_user=3), ledger)
        self.assertAlmostEqual(eps_len, 0.05)
        self.assertAlmostEqual(eps_hist, 0.05)
        self.assertAlmostEqual(eps_tree, 0.9)
        self.assertAlmostEqual(ledger.global_total(), 0.1)

    def test_noisy_height_exact_pass(self):
        rng = RandomStream(0, degenerate=True)
        self.assertEqual(noisy_height(reference_dataset(), 0.05, 0.05, 5, rng), (3, [0.0, 10.0, 5.0]))
        # longer trajectories fold into the last bucket
        self.assertEqual(noisy_height(reference_dataset(), 0.05, 0.05, 2, rng), (2, [0.0, 15.0]))

    def test_noisy_height_fail(self):
        with self.assertRaises(PreconditionError):
            noisy_height(reference_dataset(), 0.05, 0.05, 0, RandomStream(0))
        with self.assertRaises(PreconditionError):
            noisy_height(reference_dataset(), 0.0, 0.05, 3, RandomStream(0))

    def test_noisy_height_bounds_pass(self):
        for seed in range(200):
            h, hist = noisy_height(reference_dataset(), 0.05, 0.05, 4, RandomStream(seed))
            self.assertTrue(1 <= h <= 4)
            self.assertEqual(len(hist), h)

    @tag("slow")
    def test_noisy_height_centered_pass(self):
        heights = [noisy_height(reference_dataset(), 0.05, 0.05, 3, RandomStream(s))[0] for s in range(1000)]
        self.assertAlmostEqual(statistics.mean(heights), 3, delta=1)

    def test_allocate_pass(self):
        tree = build_real_tree(reference_dataset(), 3)
        l1 = tree.find((PLACE[1],))
        self.assertAlmostEqual(allocate_budget(l1, 0.9, tree), 0.3)
        l7 = tree.root.add_child(PLACE[7])
        self.assertAlmostEqual(allocate_budget(l7, 0.9, tree), 0.9)
        deep = tree.find((PLACE[4], PLACE[5]))
        self.assertAlmostEqual(allocate_budget(deep, 0.6, tree), 0.3)

    def test_allocate_fail(self):
        tree = build_real_tree(reference_dataset(), 3)
        with self.assertRaises(PreconditionError):
            allocate_budget(tree.root, 0.9, tree)
        with self.assertRaises(PreconditionError):
            allocate_budget(tree.find((PLACE[1],)), 0.0, tree)


# Clustering and coarse nodes
class Aggregation_Test(SimpleTestCase):
    def nodes(self, counts):
        tree = manual_tree(sum(counts), {STPoint(i, 0): c for i, c in enumerate(counts)}, Universe(1, len(counts), 2))
        return tree.root.ordered_children()

    def test_cluster_gaps_pass(self):
        members = self.nodes([10, 9.5, 3, 2.8, 0])
        ledger = BudgetLedger()
        clusters = cluster_nodes(BudgetClass(1, 0.3, members), 1.0, 0.05, RandomStream(0, degenerate=True), ledger)
        self.assertEqual([c.k for c in clusters], [2, 2, 1])
        self.assertEqual([m.count for m in clusters[0].members], [10, 9.5])
        self.assertAlmostEqual(ledger.per_purpose_totals()[PURPOSE_RANK], 0.25)

    def test_cluster_without_rank_budget_pass(self):
        members = self.nodes([4, 0, 7])
        clusters = cluster_nodes(BudgetClass(1, 0.3, members), 1.0, 0.0, RandomStream(0))
        self.assertEqual(len(clusters), 1)
        self.assertEqual(clusters[0].members, members)

    def test_cluster_zero_delta_isolates_nodes_pass(self):
        members = self.nodes([5, 5, 5, 0])
        ledger = BudgetLedger()
        clusters = cluster_nodes(BudgetClass(1, 0.3, members), 0.0, 0.05, RandomStream(0), ledger)
        self.assertEqual([c.k for c in clusters], [1, 1, 1, 1])
        self.assertEqual(ledger.per_purpose_totals()[PURPOSE_RANK], 0.0)

    def test_cluster_fail(self):
        with self.assertRaises(PreconditionError):
            cluster_nodes(BudgetClass(1, 0.3, []), 1.0, 0.1, RandomStream(0))

    def test_small_cluster_no_select_charge_pass(self):
        members = self.nodes([4, 2])
        ledger = BudgetLedger()
        coarse = reconstruct_cluster(Cluster(members, [4, 2]), 0.1, 0.8, 1.0,
                                     RandomStream(0, degenerate=True), ledger)
        self.assertEqual(len(coarse), 1)
        self.assertEqual(coarse[0].m, 2)
        self.assertEqual([m.count for m in members], [3.0, 3.0])
        totals = ledger.per_purpose_totals()
        self.assertEqual(totals[PURPOSE_SELECT], 0.0)
        self.assertAlmostEqual(totals[PURPOSE_COUNT], 1.6)

    def test_merge_until_stop_pass(self):
        members = self.nodes([5, 5, 5, 0])
        ledger = BudgetLedger()
        coarse = reconstruct_cluster(Cluster(members, [5, 5, 5, 0]), 0.2, 0.7, 1.0,
                                     RandomStream(0, degenerate=True), ledger)
        self.assertEqual([c.m for c in coarse], [3, 1])
        self.assertEqual([c.noisy_total for c in coarse], [15.0, 0.0])
        self.assertEqual([m.count for m in members], [5.0, 5.0, 5.0, 0.0])
        for scope, total in ledger.per_scope_totals().items():
            self.assertAlmostEqual(total, 0.9, msg=scope)

    def test_coarse_node_noise_is_shared_pass(self):
        members = self.nodes([6, 6, 6])
        coarse = reconstruct_cluster(Cluster(members, [6, 6, 6]), 0.15, 0.7, 100.0, RandomStream(3))
        for c in coarse:
            self.assertTrue(math.isclose(c.m * c.published_member_count, c.noisy_total, rel_tol=1e-15, abs_tol=1e-12))
            self.assertEqual(len({m.count for m in c.members}), 1)


# Threshold rule
class Theta_Test(SimpleTestCase):
    def test_rule_pass(self):
        cfg = AptbConfig(total_eps=1.0, h_user=3)
        self.assertAlmostEqual(compute_theta(4, 0.5, cfg), 2.7726, places=4)
        self.assertAlmostEqual(compute_theta(1, 0.5, cfg), math.log(2) / 0.5)
        self.assertEqual(compute_theta(4, 10.0, cfg), 1.0)
        self.assertEqual(compute_theta(4, 0.5, AptbConfig(total_eps=1.0, h_user=3, theta_override=2.0)), 2.0)

    def test_rule_fail(self):
        with self.assertRaises(PreconditionError):
            compute_theta(0, 0.5, AptbConfig(total_eps=1.0, h_user=3))

    def test_auto_delta_pass(self):
        self.assertAlmostEqual(resolve_delta(AptbConfig(total_eps=1.0, h_user=3), 0.7), 2 * math.sqrt(2) / 0.7)
        self.assertEqual(resolve_delta(AptbConfig(total_eps=1.0, h_user=3, delta=1.5), 0.7), 1.5)

    def test_false_expansions_bounded_pass(self):
        result = build_noisy_tree(reference_dataset(), AptbConfig(total_eps=1.0, h_user=3, seed=5))
        self.assertTrue(result.trace.classes)
        recorded = set()
        for record in result.trace.classes:
            self.assertLess(record.k * 0.5 * math.exp(-record.eps_count * record.theta), 1.0)
            self.assertLess(record.k * 0.5 * math.exp(-record.folded_eps_count * record.folded_theta), 1.0)
            self.assertGreaterEqual(record.folded_eps_count, record.eps_count)
            self.assertLessEqual(record.folded_theta, record.theta)
            recorded |= {(record.eps_count, record.theta), (record.folded_eps_count, record.folded_theta)}
        for eps_count, theta in result.trace.node_thresholds.values():
            self.assertIn((eps_count, theta), recorded)
            self.assertGreaterEqual(theta, 1.0)
            self.assertGreater(eps_count, 0)


# Noisy tree construction
class Noisy_Tree_Test(SimpleTestCase):
    def test_zero_noise_reproduces_counts_pass(self):
        d = reference_dataset()
        result = build_noisy_tree(d, exact_config())
        exact = build_real_tree(d, 3)
        self.assertEqual(result.trace.h, 3)
        self.assertEqual(result.tree.root.count, 15)
        for node in result.tree.iter_nodes():
            twin = exact.find(node.path())
            self.assertEqual(node.count, twin.count if twin is not None else 0.0, node.scope)
        for node in exact.iter_nodes():
            self.assertIsNotNone(result.tree.find(node.path()))

    def test_zero_noise_round_trip_pass(self):
        d = reference_dataset()
        out = publish(d, exact_config())
        self.assertEqual(out.dataset.canonical_key(), d.canonical_key())

    def test_zero_noise_random_datasets_pass(self):
        u = Universe(2, 2, 3)
        for seed in range(50):
            d = synth_dataset(u, 12, 3, 1.0, seed)
            out = publish(d, exact_config())
            self.assertEqual(out.dataset.canonical_key(), d.canonical_key(), f"seed {seed}")

    def test_every_node_charged_its_allocation_pass(self):
        result = build_noisy_tree(reference_dataset(), AptbConfig(total_eps=1.0, h_user=3, seed=2))
        per_scope = result.ledger.per_scope_totals()
        for node in result.tree.iter_nodes():
            if node.is_root:
                continue
            self.assertAlmostEqual(per_scope[node.scope], node.eps, msg=node.scope)

    def test_zero_delta_spends_everything_on_counts_pass(self):
        result = build_noisy_tree(reference_dataset(), AptbConfig(total_eps=1.0, h_user=3, delta=0.0, seed=2))
        totals = result.ledger.per_purpose_totals()
        self.assertEqual(totals[PURPOSE_RANK], 0.0)
        self.assertEqual(totals[PURPOSE_SELECT], 0.0)
        for record in result.trace.classes:
            self.assertEqual(record.clusters, record.k)
            self.assertAlmostEqual(record.folded_eps_count, record.eps_node)
        per_scope = result.ledger.per_scope_totals()
        for node in result.tree.iter_nodes():
            if not node.is_root:
                self.assertAlmostEqual(per_scope[node.scope], node.eps, msg=node.scope)

    def test_pruning_below_threshold_pass(self):
        for seed in range(50):
            cfg = AptbConfig(total_eps=1.0, h_user=3, theta_override=2.0, seed=seed)
            tree = build_noisy_tree(reference_dataset(), cfg).tree
            for node in tree.iter_nodes():
                self.assertLessEqual(node.depth, 3)
                if node.is_root:
                    continue
                if node.count < 2.0:
                    self.assertTrue(node.leaf, f"seed {seed} {node.scope}")
                    self.assertEqual(node.children, {}, f"seed {seed} {node.scope}")
                if node.children:
                    self.assertGreaterEqual(node.count, 2.0, f"seed {seed} {node.scope}")

    def test_pruning_exact_counts_pass(self):
        cfg = AptbConfig(total_eps=1.0, h_user=3, delta=0.0, theta_override=2.0, zero_noise=True)
        result = build_noisy_tree(reference_dataset(), cfg)
        # exact counts of one stop expansion below the threshold
        l1 = result.tree.find((PLACE[1],))
        self.assertEqual(l1.count, 2.0)
        self.assertFalse(l1.leaf)
        l47 = result.tree.find((PLACE[4], PLACE[7]))
        self.assertEqual(l47.count, 1.0)
        self.assertTrue(l47.leaf)
        self.assertEqual(l47.children, {})

    def test_audit_within_budget_pass(self):
        cfg = AptbConfig(total_eps=1.0, h_user=3, theta_override=2.0, seed=7)
        result = build_noisy_tree(reference_dataset(), cfg)
        report = verify_composition(result.ledger, result.tree, 1.0)
        self.assertTrue(report.passed)
        self.assertLessEqual(report.max_path_sum, 1.0 + 1e-9)

    def test_coarse_node_arithmetic_pass(self):
        for seed in range(20):
            result = build_noisy_tree(reference_dataset(), AptbConfig(total_eps=0.5, h_user=3, seed=seed))
            for c in result.trace.coarse_nodes:
                self.assertTrue(math.isclose(c.m * c.published_member_count, c.noisy_total,
                                             rel_tol=1e-15, abs_tol=1e-12))

    def test_deterministic_pass(self):
        cfg = AptbConfig(total_eps=1.0, h_user=3, seed=11)
        a, b = publish(reference_dataset(), cfg), publish(reference_dataset(), cfg)
        self.assertEqual(a.ledger.export(), b.ledger.export())
        self.assertEqual(a.dataset, b.dataset)

    def test_empty_dataset_pass(self):
        d = synth_dataset(Universe(1, 2, 2), 0, 2, 1.0, 0)
        out = publish(d, AptbConfig(total_eps=1.0, h_user=2, seed=1))
        self.assertTrue(out.audit.passed)
        self.assertEqual(consistency_violations(out.consistent_tree), [])

    @tag("slow")
    def test_audit_fuzz_pass(self):
        picker = random.Random(2024)
        u = Universe(2, 2, 3)
        for i in range(200):
            d = synth_dataset(u, picker.randint(0, 30), 3, picker.uniform(0, 2), i)
            cfg = AptbConfig(total_eps=picker.choice([0.1, 0.5, 1.0, 4.0]), h_user=picker.randint(1, 4), seed=i)
            report = publish(d, cfg).audit
            self.assertLessEqual(report.max_path_sum, cfg.total_eps + 1e-9)


# Consistency and generation
class Consistency_Test(SimpleTestCase):
    def test_rescale_pass(self):
        tree = manual_tree(5, {STPoint(0, 0): 3, STPoint(1, 0): 4})
        out = enforce_consistency(tree)
        self.assertEqual([c.count for c in out.root.ordered_children()], [2.0, 3.0])
        self.assertEqual(consistency_violations(out), [])
        # input untouched
        self.assertEqual([c.count for c in tree.root.ordered_children()], [3.0, 4.0])

    def test_clamp_and_round_pass(self):
        tree = manual_tree(4.6, {STPoint(0, 0): -2.0, STPoint(1, 0): 1.4, STPoint(2, 0): 0.2})
        out = enforce_consistency(tree)
        self.assertEqual(out.root.count, 5.0)
        self.assertEqual([str(c.label) for c in out.root.ordered_children()], ["1:0"])
        self.assertEqual(consistency_violations(out), [])

    def test_violations_fail(self):
        tree = manual_tree(2.5, {STPoint(0, 0): 3})
        problems = consistency_violations(tree)
        self.assertEqual(len(problems), 3)
        with self.assertRaises(PreconditionError):
            generate_dataset(tree)

    def test_generate_pass(self):
        u = Universe(1, 4, 2)
        root = TreeNode(None, 0, 5)
        a = root.add_child(STPoint(0, 0), 3)
        a.add_child(STPoint(1, 1), 2)
        root.add_child(STPoint(2, 0), 1)
        tree = PrefixTree(root, 2, u)
        terminals = {str(n.label): v for n, v in terminal_counts(tree).items()}
        self.assertEqual(terminals, {"None": 1, "0:0": 1, "1:1": 2, "2:0": 1})
        d = generate_dataset(tree)
        self.assertEqual([str(t) for t in d], ["0:0", "0:0 1:1", "0:0 1:1", "2:0"])

    @tag("slow")
    def test_noisy_tree_fuzz_pass(self):
        picker = random.Random(7)
        u = Universe(2, 2, 3)
        for i in range(1000):
            tree = random_tree(picker, u, picker.randint(1, 3), noisy=True)
            out = enforce_consistency(tree)
            self.assertEqual(consistency_violations(out), [], f"tree {i}")
            again = enforce_consistency(out)
            self.assertEqual([(n.scope, n.count) for n in again.iter_nodes()],
                             [(n.scope, n.count) for n in out.iter_nodes()], f"tree {i}")

    def test_generate_then_rebuild_pass(self):
        picker = random.Random(11)
        u = Universe(2, 2, 3)
        for i in range(200):
            tree = random_tree(picker, u, 3, noisy=False)
            self.assertEqual(consistency_violations(tree), [], f"tree {i}")
            rebuilt = build_real_tree(generate_dataset(tree), tree.height_limit)
            # trajectories ending at the root are not emitted
            self.assertEqual(rebuilt.root.count, tree.root.children_total(), f"tree {i}")
            expected = {n.path(): n.count for n in tree.iter_nodes() if not n.is_root}
            actual = {n.path(): n.count for n in rebuilt.iter_nodes() if not n.is_root}
            self.assertEqual(actual, expected, f"tree {i}")
