import random

from django.test import SimpleTestCase

from evaluation.fixtures import PLACE, reference_dataset
from evaluation.synth import synth_dataset
from trajectories.dataset import (
    Dataset,
    RawTrace,
    STPoint,
    Trajectory,
    Universe,
    brute_force_prefix_count,
    length_histogram,
    max_length,
    remove_one,
)
from trajectories.discretize import BBox, discretize
from trajectories.exceptions import (
    DatasetParseError,
    DomainError,
    EmptyTrajectoryError,
    OrderingError,
    PreconditionError,
)
from trajectories.fileformat import (
    parse_dataset,
    parse_raw_traces,
    parse_timestamp,
    read_universe_header,
    serialize_dataset,
)
from trajectories.prefix_tree import (
    SONSET_OBSERVED,
    build_real_tree,
    dump_tree,
    max_expand,
    prefix_count,
    son_set,
)
from trajectories.serializers import DiscretizeSerializer, UniverseSerializer


def P(cell, slot):
    return STPoint(cell, slot)


# Universe and trajectory invariants
class Trajectory_Model_Test(SimpleTestCase):
    def test_universe_labels_pass(self):
        u = Universe(2, 3, 4)
        self.assertEqual(u.cell_count, 6)
        self.assertEqual(u.label_count, 24)
        later = u.labels_after(1)
        self.assertEqual(len(later), 12)
        self.assertEqual(later[0], P(0, 2))
        self.assertEqual(later[-1], P(5, 3))

    def test_universe_fail(self):
        with self.assertRaises(DomainError):
            Universe(0, 2, 2)

    def test_trajectory_slots_must_increase_fail(self):
        with self.assertRaises(OrderingError):
            Trajectory((P(0, 1), P(1, 1)))
        with self.assertRaises(EmptyTrajectoryError):
            Trajectory(())

    def test_dataset_outside_universe_fail(self):
        with self.assertRaises(DomainError):
            Dataset(Universe(1, 2, 2), (Trajectory((P(2, 0),)),))

    def test_reference_statistics_pass(self):
        d = reference_dataset()
        self.assertEqual(len(d), 15)
        self.assertEqual(max_length(d), 3)
        self.assertEqual(length_histogram(d), [0, 10, 5])

    def test_remove_one_pass(self):
        d = reference_dataset()
        d2 = remove_one(d, 0)
        self.assertEqual(len(d2), 14)
        self.assertEqual(d2.trajectories[0], d.trajectories[1])

    def test_remove_one_fail(self):
        with self.assertRaises(PreconditionError):
            remove_one(reference_dataset(), 15)

    def test_remove_one_drops_single_trajectory_pass(self):
        d = reference_dataset()
        self.assertEqual(d.trajectories[12].points, (PLACE[4], PLACE[7]))
        self.assertEqual(prefix_count(build_real_tree(d, 3), (PLACE[4], PLACE[7])), 1)
        neighbour = build_real_tree(remove_one(d, 12), 3)
        self.assertEqual(prefix_count(neighbour, (PLACE[4], PLACE[7])), 0)
        self.assertEqual(prefix_count(neighbour, (PLACE[4],)), 3)

    def test_remove_one_moves_prefix_counts_by_one_pass(self):
        picker = random.Random(17)
        u = Universe(2, 2, 3)
        for seed in range(40):
            d = synth_dataset(u, picker.randint(1, 15), 3, picker.uniform(0, 2), seed)
            full = build_real_tree(d, 3)
            for index in range(len(d)):
                d2 = remove_one(d, index)
                paths = {n.path() for n in full.iter_nodes() if not n.is_root}
                paths |= {n.path() for n in build_real_tree(d2, 3).iter_nodes() if not n.is_root}
                for path in paths:
                    change = brute_force_prefix_count(d, path) - brute_force_prefix_count(d2, path)
                    self.assertIn(change, (0, 1), f"seed {seed} index {index} prefix {path}")

    def test_canonical_key_ignores_order(self):
        u = Universe(1, 2, 2)
        a = Dataset(u, (Trajectory((P(0, 0),)), Trajectory((P(1, 0), P(0, 1)))))
        b = Dataset(u, tuple(reversed(a.trajectories)))
        self.assertEqual(a.canonical_key(), b.canonical_key())


# Dataset file format
class Dataset_File_Test(SimpleTestCase):
    def test_header_pass(self):
        self.assertEqual(read_universe_header("universe rows=5 cols=4 slots=3"), Universe(5, 4, 3))

    def test_header_fail(self):
        with self.assertRaises(DatasetParseError):
            read_universe_header("universe 5 4 3")

    def test_parse_with_blank_lines_pass(self):
        d = parse_dataset("universe rows=1 cols=2 slots=3\n\n0:0 1:2\n\n1:1\n")
        self.assertEqual(len(d), 2)
        self.assertEqual(d.trajectories[0].points, (P(0, 0), P(1, 2)))

    def test_serialize_then_parse_pass(self):
        d = reference_dataset()
        text = serialize_dataset(d)
        self.assertTrue(text.startswith("universe rows=1 cols=7 slots=7\n"))
        self.assertEqual(parse_dataset(text), d)

    def test_universe_from_caller_pass(self):
        d = parse_dataset("0:0 1:1\n", Universe(1, 2, 2))
        self.assertEqual(d.universe, Universe(1, 2, 2))

    def test_no_universe_fail(self):
        with self.assertRaises(DatasetParseError):
            parse_dataset("0:0 1:1\n")

    def test_header_disagrees_with_caller_fail(self):
        with self.assertRaises(DomainError):
            parse_dataset("universe rows=1 cols=2 slots=2\n0:0\n", Universe(2, 2, 2))

    def test_errors_carry_line_numbers_fail(self):
        with self.assertRaises(DatasetParseError) as cm:
            parse_dataset("universe rows=1 cols=2 slots=2\n0:0\n0-1\n")
        self.assertEqual(cm.exception.line_no, 3)
        self.assertIn("line 3", str(cm.exception))
        with self.assertRaises(DomainError) as cm:
            parse_dataset("universe rows=1 cols=2 slots=2\n5:0\n")
        self.assertEqual(cm.exception.line_no, 2)
        with self.assertRaises(OrderingError) as cm:
            parse_dataset("universe rows=1 cols=2 slots=2\n0:1 1:0\n")
        self.assertEqual(cm.exception.line_no, 2)


# Raw traces and discretization
class Discretize_Test(SimpleTestCase):
    def test_timestamps_pass(self):
        self.assertEqual(parse_timestamp("12.5"), 12.5)
        self.assertEqual(parse_timestamp("2024-01-01T00:00:00Z"), 1704067200.0)
        # naive timestamps are read as UTC
        self.assertEqual(parse_timestamp("2024-01-01T00:00:10"), 1704067210.0)

    def test_raw_traces_pass(self):
        traces = parse_raw_traces("0,0,0\n1,1,5\n\n\n2,2,2024-01-01T00:00:00Z\n")
        self.assertEqual(len(traces), 2)
        self.assertEqual(traces[0].samples[1], (1.0, 1.0, 5.0))
        self.assertEqual(traces[1].samples[0][2], 1704067200.0)

    def test_raw_traces_fail(self):
        with self.assertRaises(OrderingError):
            parse_raw_traces("0,0,5\n1,1,4\n")
        with self.assertRaises(DatasetParseError) as cm:
            parse_raw_traces("0,0,5\n1,1\n")
        self.assertEqual(cm.exception.line_no, 2)

    def test_discretize_pass(self):
        u = Universe(2, 2, 3)
        trace = RawTrace((
            (0.5, 0.5, 1.0),    # cell 0, slot 0
            (1.5, 0.5, 5.0),    # slot 0 already taken
            (1.5, 1.5, 12.0),   # cell 3, slot 1
            (2.0, 2.0, 25.0),   # max edges belong to the last cell
            (5.0, 5.0, 28.0),   # outside the box
        ))
        traj = discretize(trace, u, BBox(0, 0, 2, 2), 0.0, 10.0)
        self.assertEqual(str(traj), "0:0 3:1 3:2")

    def test_discretize_fail(self):
        u = Universe(2, 2, 3)
        with self.assertRaises(EmptyTrajectoryError):
            discretize(RawTrace(((9.0, 9.0, 0.0),)), u, BBox(0, 0, 2, 2), 0.0, 10.0)
        with self.assertRaises(DomainError):
            BBox(0, 0, 0, 2)


# Exact prefix tree over the 15-trajectory example
class Reference_Tree_Test(SimpleTestCase):
    def setUp(self):
        self.d = reference_dataset()
        self.tree = build_real_tree(self.d, 3)

    def test_level_one_counts_pass(self):
        counts = {str(n.label): n.count for n in self.tree.root.ordered_children()}
        self.assertEqual(self.tree.root.count, 15)
        self.assertEqual(counts, {"0:0": 2, "1:1": 2, "2:2": 3, "3:3": 4, "4:4": 4})

    def test_deeper_counts_pass(self):
        self.assertEqual(prefix_count(self.tree, (PLACE[4], PLACE[5])), 3)
        self.assertEqual(prefix_count(self.tree, (PLACE[5], PLACE[6])), 3)
        self.assertEqual(prefix_count(self.tree, (PLACE[4], PLACE[7])), 1)
        self.assertEqual(prefix_count(self.tree, (PLACE[6],)), 0)

    def test_counts_match_brute_force_pass(self):
        for node in self.tree.iter_nodes():
            self.assertEqual(node.count, brute_force_prefix_count(self.d, node.path()))

    def test_prefix_longer_than_height_fail(self):
        with self.assertRaises(PreconditionError):
            prefix_count(self.tree, (PLACE[1], PLACE[3], PLACE[4], PLACE[5]))

    def test_son_set_and_max_expand_pass(self):
        root = self.tree.root
        l4 = self.tree.find((PLACE[4],))
        self.assertEqual(len(son_set(root, self.tree)), 49)
        self.assertEqual(len(son_set(l4, self.tree)), 21)
        self.assertEqual(max_expand(root, self.tree), 3)
        self.assertEqual(max_expand(self.tree.find((PLACE[5], PLACE[6])), self.tree), 1)
        self.assertEqual(max_expand(self.tree.find((PLACE[4], PLACE[7])), self.tree), 0)
        leaf = self.tree.find((PLACE[2], PLACE[5], PLACE[6]))
        self.assertEqual(son_set(leaf, self.tree), [])

    def test_observed_son_set_pass(self):
        tree = build_real_tree(self.d, 3, SONSET_OBSERVED)
        labels = son_set(tree.find((PLACE[4],)), tree)
        self.assertEqual(labels, [PLACE[5], PLACE[6], PLACE[7]])

    def test_find_scope_pass(self):
        node = self.tree.find_scope("root/3:3/4:4")
        self.assertEqual(node.count, 3)
        self.assertIsNone(self.tree.find_scope("root/3:3/9:9"))
        self.assertIsNone(self.tree.find_scope("global/pre-length"))

    def test_leaf_paths_pass(self):
        ends = {tuple(str(n.label) for n in path[1:]) for path in self.tree.leaf_paths()}
        self.assertIn(("0:0", "1:1"), ends)
        self.assertIn(("1:1", "4:4", "5:5"), ends)
        self.assertTrue(all(not path[-1].children for path in self.tree.leaf_paths()))

    def test_dump_pass(self):
        d = parse_dataset("universe rows=1 cols=2 slots=2\n0:0 1:1\n0:0\n")
        text = dump_tree(build_real_tree(d, 2))
        self.assertEqual(text, "root c=2 eps=-\n0:0 c=2 eps=-\n  1:1 c=1 eps=-\n")


# Flag validation
class Universe_Serializer_Test(SimpleTestCase):
    def test_universe_pass(self):
        ser = UniverseSerializer(data={"rows": 2, "cols": 3, "slots": 4})
        self.assertTrue(ser.is_valid())
        self.assertEqual(ser.save(), Universe(2, 3, 4))

    def test_universe_fail(self):
        ser = UniverseSerializer(data={"rows": -1, "cols": 3, "slots": 4})
        self.assertFalse(ser.is_valid())
        self.assertIn("rows", ser.errors)

    def test_discretize_params_pass(self):
        ser = DiscretizeSerializer(data={
            "rows": 2, "cols": 2, "slots": 3, "bbox": "0,0,2,2",
            "time_origin": "1970-01-01T00:00:00Z", "slot_width": 10,
        })
        self.assertTrue(ser.is_valid(), ser.errors)
        params = ser.save()
        self.assertEqual(params["bbox"], BBox(0, 0, 2, 2))
        self.assertEqual(params["time_origin"], 0.0)

    def test_discretize_params_fail(self):
        ser = DiscretizeSerializer(data={
            "rows": 2, "cols": 2, "slots": 3, "bbox": "0,0,0,2", "time_origin": "x", "slot_width": 0,
        })
        self.assertFalse(ser.is_valid())
        self.assertEqual(set(ser.errors), {"bbox", "time_origin", "slot_width"})
