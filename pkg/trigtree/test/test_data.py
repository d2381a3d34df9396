'''
Unit testing for the data model

Tests:
    substreams
    Dataset validation
    train / validation / estimation / test split
    k-fold assignment
    node index routing
'''

import unittest

import numpy as np

from trigtree.toolbox.data import (DISCRETE, Dataset, NodeSample, Sample, kfold_indices, split_dataset, subset,
                                   substream)
from trigtree.toolbox.errors import EmptyData, InputValidationError
from trigtree.toolbox.learner import SplitRule


def small_dataset(n=100, seed=3):
    rng = np.random.default_rng(seed)
    return Dataset(features=rng.uniform(size=(n, 2)),
                   treatment=rng.uniform(0, 10, size=n),
                   outcome=rng.standard_normal(n))


class TestSubstream(unittest.TestCase):
    def test_same_name_same_draws(self):
        a = substream(7, 'split').uniform(size=5)
        b = substream(7, 'split').uniform(size=5)
        np.testing.assert_array_equal(a, b)

    def test_names_are_independent(self):
        a = substream(7, 'split').uniform(size=5)
        b = substream(7, 'generate').uniform(size=5)
        self.assertFalse(np.allclose(a, b))

    def test_negative_seed(self):
        with self.assertRaises(InputValidationError):
            substream(-1, 'split')


class TestDataset(unittest.TestCase):
    def test_basic_accessors(self):
        data = small_dataset(10)
        self.assertEqual(len(data), 10)
        self.assertEqual(data.dimension, 2)
        self.assertEqual(data.feature_names, ['x0', 'x1'])
        self.assertFalse(data.has_true_effect)
        sample = data[3]
        self.assertIsInstance(sample, Sample)
        self.assertAlmostEqual(sample.treatment, data.treatment[3])

    def test_from_samples(self):
        samples = [Sample((0.1, 0.2), 1.0, 2.0, 0.5), Sample((0.3, 0.4), 0.0, 1.0, 0.5)]
        data = Dataset.from_samples(samples)
        self.assertEqual(data.dimension, 2)
        self.assertTrue(data.has_true_effect)
        np.testing.assert_array_equal(data.outcome, [2.0, 1.0])

    def test_arrays_are_read_only(self):
        data = small_dataset(5)
        with self.assertRaises(ValueError):
            data.outcome[0] = 1.0

    def test_missing_values_rejected(self):
        X = np.zeros((4, 2))
        X[2, 1] = np.nan
        with self.assertRaises(InputValidationError):
            Dataset(X, np.ones(4), np.ones(4))
        with self.assertRaises(InputValidationError):
            Dataset(np.zeros((4, 2)), [1, 2, np.inf, 3], np.ones(4))

    def test_length_mismatch(self):
        with self.assertRaises(InputValidationError):
            Dataset(np.zeros((4, 2)), np.ones(3), np.ones(4))

    def test_unknown_feature_kind(self):
        with self.assertRaises(InputValidationError):
            Dataset(np.zeros((2, 1)), [0, 1], [0, 1], feature_kinds=['categorical'])

    def test_subset(self):
        data = small_dataset(10)
        part = subset(data, [4, 1])
        self.assertEqual(len(part), 2)
        self.assertAlmostEqual(part.outcome[0], data.outcome[4])
        with self.assertRaises(IndexError):
            subset(data, [10])
        with self.assertRaises(ValueError):
            subset(data, [1, 1])


class TestSplit(unittest.TestCase):
    def test_part_sizes_and_disjointness(self):
        data = small_dataset(100)
        split = split_dataset(data, validation_fraction=0.3, estimation_fraction=0.1, test_fraction=0.2, seed=5)
        self.assertEqual(len(split.validation), 30)
        self.assertEqual(len(split.estimation), 10)
        self.assertEqual(len(split.test), 20)
        self.assertEqual(len(split.train), 40)
        self.assertEqual(split.source_size, 100)

        everything = np.concatenate([split.train_idx, split.val_idx, split.est_idx, split.test_idx])
        np.testing.assert_array_equal(np.sort(everything), np.arange(100))

    def test_optional_parts_absent(self):
        split = split_dataset(small_dataset(20), validation_fraction=0.5)
        self.assertIsNone(split.estimation)
        self.assertIsNone(split.test)
        self.assertEqual(len(split.train), 10)

    def test_reproducible(self):
        data = small_dataset(50)
        a = split_dataset(data, 0.4, seed=11)
        b = split_dataset(data, 0.4, seed=11)
        c = split_dataset(data, 0.4, seed=12)
        np.testing.assert_array_equal(a.val_idx, b.val_idx)
        self.assertFalse(np.array_equal(a.val_idx, c.val_idx))

    def test_bad_fractions(self):
        data = small_dataset(10)
        with self.assertRaises(InputValidationError):
            split_dataset(data, validation_fraction=0.6, test_fraction=0.4)
        with self.assertRaises(InputValidationError):
            split_dataset(data, validation_fraction=1.2)

    def test_empty(self):
        empty = Dataset(np.zeros((0, 2)), [], [])
        with self.assertRaises(EmptyData):
            split_dataset(empty)


class TestFolds(unittest.TestCase):
    def test_folds_partition(self):
        folds = kfold_indices(10, 3, seed=0)
        self.assertEqual(sorted(len(f) for f in folds), [3, 3, 4])
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(10))

    def test_fold_count(self):
        with self.assertRaises(InputValidationError):
            kfold_indices(10, 1, seed=0)
        with self.assertRaises(InputValidationError):
            kfold_indices(3, 4, seed=0)


class TestNodeSample(unittest.TestCase):
    def test_split_routes_every_part(self):
        data = small_dataset(60)
        split = split_dataset(data, validation_fraction=0.25, estimation_fraction=0.25)
        root = NodeSample.root(split)
        self.assertEqual(root.sizes, (30, 15, 15))

        left, right = root.split(SplitRule(feature=0, threshold=0.5), split)
        self.assertTrue(np.all(split.train.features[left.train_idx, 0] <= 0.5))
        self.assertTrue(np.all(split.train.features[right.train_idx, 0] > 0.5))
        self.assertTrue(np.all(split.estimation.features[left.est_idx, 0] <= 0.5))
        for a, b, total in zip(left.sizes, right.sizes, root.sizes):
            self.assertEqual(a + b, total)

    def test_discrete_threshold_goes_left(self):
        X = np.array([[0.0], [1.0], [1.0], [2.0]])
        data = Dataset(X, [0, 1, 2, 3], [0, 0, 1, 1], feature_kinds=[DISCRETE])
        split = split_dataset(data, validation_fraction=0.0)
        left, right = NodeSample.root(split).split(SplitRule(feature=0, threshold=1.0), split)
        self.assertEqual(len(left.train_idx), 3)
        self.assertEqual(len(right.train_idx), 1)


if __name__ == "__main__":
    unittest.main()
