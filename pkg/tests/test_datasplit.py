"""Tests for the datasplit module"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from aind_network_regression.datasplit import (
    AgentMask,
    CoverageError,
    GlobalData,
    SplitScheme,
    generate_global_data,
    load_global_data,
    multiplicity,
    preset_masks,
    read_masks,
    split_from_masks,
    write_masks,
)


def reassemble(summands):
    """Sum of the summands' X and y."""
    X = np.sum([s.X for s in summands], axis=0)
    y = np.sum([s.y for s in summands], axis=0)
    return X, y


class TestGlobalData(unittest.TestCase):
    """Tests for GlobalData validation and generation"""

    def test_shapes(self):
        """n and p come from X."""
        data = GlobalData(X=np.ones((3, 2)), y=np.zeros(3))
        self.assertEqual((3, 2), (data.n, data.p))

    def test_rejects_mismatch(self):
        """y needs one entry per row."""
        with self.assertRaises(ValueError):
            GlobalData(X=np.ones((3, 2)), y=np.zeros(2))

    def test_rejects_nonfinite(self):
        """NaN entries are rejected."""
        with self.assertRaises(ValueError):
            GlobalData(X=[[1.0, np.nan]], y=[0.0])

    def test_generate_seeded(self):
        """Same seed, same data."""
        a = generate_global_data(20, 40, 0)
        b = generate_global_data(20, 40, 0)
        self.assertEqual((20, 40), a.X.shape)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)

    def test_load_missing_file(self):
        """Nonexistent paths raise FileNotFoundError."""
        with self.assertRaises(FileNotFoundError):
            load_global_data("no_such_x.csv", "no_such_y.csv")

    def test_load_csv(self):
        """Matrix rows and a single label column."""
        with tempfile.TemporaryDirectory() as tmp:
            x_path = Path(tmp) / "x.csv"
            y_path = Path(tmp) / "y.csv"
            x_path.write_text("1,0\n0,1\n")
            y_path.write_text("2\n0\n")
            data = load_global_data(x_path, y_path)
        np.testing.assert_array_equal(np.eye(2), data.X)
        np.testing.assert_array_equal([2.0, 0.0], data.y)


class TestSplitFromMasks(unittest.TestCase):
    """Tests for split_from_masks"""

    def test_shared_cell_split_equally(self):
        """A cell held by two agents is halved."""
        data = GlobalData(X=[[6.0, 1.0]], y=[3.0])
        masks = [
            AgentMask.from_indices(1, 1, 2, [(0, 0), (0, 1)], [0]),
            AgentMask.from_indices(2, 1, 2, [(0, 0)], []),
            AgentMask.from_indices(3, 1, 2, [], []),
        ]
        summands = split_from_masks(data, masks)
        self.assertEqual(3.0, summands[0].X[0, 0])
        self.assertEqual(3.0, summands[1].X[0, 0])
        self.assertEqual(0.0, summands[2].X[0, 0])

    def test_single_holder_gets_full_value(self):
        """A cell held by one agent carries its full value there only."""
        data = GlobalData(X=[[6.0, 1.0]], y=[3.0])
        masks = [
            AgentMask.from_indices(1, 1, 2, [(0, 0)], [0]),
            AgentMask.from_indices(2, 1, 2, [(0, 1)], []),
        ]
        summands = split_from_masks(data, masks)
        np.testing.assert_array_equal([[6.0, 0.0]], summands[0].X)
        np.testing.assert_array_equal([[0.0, 1.0]], summands[1].X)
        np.testing.assert_array_equal([3.0], summands[0].y)
        np.testing.assert_array_equal([0.0], summands[1].y)

    def test_reassembly_overlapping(self):
        """Overlapping random masks add back up to the data."""
        data = generate_global_data(20, 40, 1)
        masks = preset_masks("arbitrary-overlapping", 20, 40, 6, 0)
        X, y = reassemble(split_from_masks(data, masks))
        np.testing.assert_allclose(X, data.X, rtol=1e-12, atol=0)
        np.testing.assert_allclose(y, data.y, rtol=1e-12, atol=0)

    def test_multiplicity_contributions(self):
        """A cell with multiplicity k appears as value/k in k summands."""
        data = generate_global_data(10, 12, 2)
        masks = preset_masks("arbitrary-overlapping", 10, 12, 4, 3, 0.3)
        counts, _ = multiplicity(masks)
        summands = split_from_masks(data, masks)
        stacked = np.array([s.X for s in summands])
        nonzero = np.count_nonzero(stacked, axis=0)
        np.testing.assert_array_equal(counts, nonzero)
        for summand, mask in zip(summands, masks):
            np.testing.assert_allclose(
                summand.X[mask.cells], (data.X / counts)[mask.cells]
            )

    def test_order_independent(self):
        """Shuffling the masks gives the same summands per agent."""
        data = generate_global_data(6, 5, 3)
        masks = preset_masks("blocks", 6, 5, 4)
        forward = split_from_masks(data, masks)
        backward = split_from_masks(data, list(reversed(masks)))
        for a, b in zip(forward, backward):
            self.assertEqual(a.agent, b.agent)
            np.testing.assert_array_equal(a.X, b.X)
            np.testing.assert_array_equal(a.y, b.y)

    def test_coverage_gap_named(self):
        """The first uncovered cell is named."""
        data = GlobalData(X=np.ones((2, 2)), y=np.ones(2))
        masks = [
            AgentMask.from_indices(1, 2, 2, [(0, 0), (0, 1), (1, 0)], [0, 1])
        ]
        with self.assertRaises(CoverageError) as e:
            split_from_masks(data, masks)
        self.assertIn("X[1, 1]", str(e.exception))

    def test_label_gap_named(self):
        """An uncovered label row is named."""
        data = GlobalData(X=np.ones((2, 1)), y=np.ones(2))
        masks = [AgentMask.from_indices(1, 2, 1, [(0, 0), (1, 0)], [0])]
        with self.assertRaises(CoverageError) as e:
            split_from_masks(data, masks)
        self.assertIn("y[1]", str(e.exception))

    def test_repeated_agent(self):
        """Each agent holds one mask."""
        data = GlobalData(X=np.ones((1, 1)), y=np.ones(1))
        mask = AgentMask.from_indices(1, 1, 1, [(0, 0)], [0])
        with self.assertRaises(ValueError):
            split_from_masks(data, [mask, mask])

    def test_index_out_of_range(self):
        """Mask indices must lie inside the data."""
        with self.assertRaises(IndexError):
            AgentMask.from_indices(1, 2, 2, [(2, 0)], [])


class TestPresetMasks(unittest.TestCase):
    """Tests for preset_masks"""

    def test_columns(self):
        """Contiguous column halves; labels with agent 1."""
        masks = preset_masks(SplitScheme.COLUMNS, 4, 4, 2)
        np.testing.assert_array_equal(
            [0, 1], np.flatnonzero(masks[0].cells.any(axis=0))
        )
        np.testing.assert_array_equal(
            [2, 3], np.flatnonzero(masks[1].cells.any(axis=0))
        )
        self.assertTrue(masks[0].label_rows.all())
        self.assertFalse(masks[1].label_rows.any())

    def test_rows(self):
        """Contiguous row halves with their labels."""
        masks = preset_masks("rows", 4, 2, 2)
        np.testing.assert_array_equal(
            [0, 1], np.flatnonzero(masks[0].cells.all(axis=1))
        )
        np.testing.assert_array_equal(
            [2, 3], np.flatnonzero(masks[1].cells.all(axis=1))
        )
        np.testing.assert_array_equal(
            [0, 1], np.flatnonzero(masks[0].label_rows)
        )
        np.testing.assert_array_equal(
            [2, 3], np.flatnonzero(masks[1].label_rows)
        )

    def test_blocks_partition(self):
        """Blocks cover every cell exactly once."""
        masks = preset_masks("blocks", 20, 40, 6)
        counts, label_counts = multiplicity(masks)
        self.assertTrue(np.all(counts == 1))
        self.assertTrue(np.all(label_counts == 1))
        self.assertEqual(list(range(1, 7)), [mask.agent for mask in masks])

    def test_overlapping(self):
        """Every cell covered, some cells held twice, no cell thrice."""
        masks = preset_masks("arbitrary-overlapping", 20, 40, 6, 0)
        counts, label_counts = multiplicity(masks)
        self.assertEqual(800, int(np.sum(counts >= 1)))
        self.assertGreaterEqual(int(np.sum(counts == 2)), 1)
        self.assertLessEqual(int(counts.max()), 2)
        self.assertTrue(np.all(label_counts >= 1))
        for mask in masks:
            self.assertTrue(mask.cells.any())

    def test_overlapping_seeded(self):
        """Same seed, same masks."""
        a = preset_masks("arbitrary-overlapping", 8, 9, 3, 5)
        b = preset_masks("arbitrary-overlapping", 8, 9, 3, 5)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.cells, y.cells)

    def test_infeasible(self):
        """More agents than columns or rows is rejected."""
        with self.assertRaises(ValueError):
            preset_masks("columns", 4, 2, 3)
        with self.assertRaises(ValueError):
            preset_masks("rows", 2, 4, 3)
        with self.assertRaises(ValueError):
            preset_masks("blocks", 2, 2, 5)
        with self.assertRaises(ValueError):
            preset_masks("diagonal", 2, 2, 2)


class TestMaskFiles(unittest.TestCase):
    """Tests for reading and writing mask files"""

    def test_round_trip(self):
        """Masks survive a write and read."""
        masks = preset_masks("arbitrary-overlapping", 5, 6, 3, 1)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "masks.txt"
            write_masks(masks, path)
            loaded = read_masks(path, 5, 6, 3)
        for a, b in zip(masks, loaded):
            self.assertEqual(a.agent, b.agent)
            np.testing.assert_array_equal(a.cells, b.cells)
            np.testing.assert_array_equal(a.label_rows, b.label_rows)

    def test_unnamed_agent_gets_empty_mask(self):
        """Agents missing from the file hold nothing."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "masks.txt"
            path.write_text("agent 1 cell 0 0\nagent 1 label 0\n")
            masks = read_masks(path, 1, 1, 2)
        self.assertEqual([1, 2], [mask.agent for mask in masks])
        self.assertFalse(masks[1].cells.any())

    def test_malformed(self):
        """Bad lines name their line number."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "masks.txt"
            path.write_text("agent 1 cell 0 0\nagent one cell 0 0\n")
            with self.assertRaises(ValueError) as e:
                read_masks(path, 1, 1)
        self.assertIn("line 2", str(e.exception))


if __name__ == "__main__":
    unittest.main()
