'''
Unit testing for the evaluation metrics

Tests:
    SMAPE-type errors
    leaf variance
    Mahalanobis balance
    tree reports and method comparison
'''

import unittest

import numpy as np

from trigtree.toolbox.data import Dataset, split_dataset
from trigtree.toolbox.errors import DegenerateGroup, EmptyData, InputValidationError
from trigtree.toolbox.estimators import CriterionConfig
from trigtree.toolbox.evaluation import (ace_error, compare_methods, evaluate_tree, leaf_effects, leaf_variance,
                                         mahalanobis_balance, unit_smape)
from trigtree.toolbox.learner import LearnerConfig, SplitRule, TreeNode, leaves, train
from trigtree.toolbox.synthetic import default_model, generate


class TestMetrics(unittest.TestCase):
    def test_unit_smape(self):
        self.assertEqual(unit_smape([1.0, -2.0], [1.0, -2.0]), 0.0)
        self.assertAlmostEqual(unit_smape([1.0], [-1.0]), 1.0)
        # 0 / 0 counts as a perfect prediction
        self.assertEqual(unit_smape([0.0, 0.0], [0.0, 0.0]), 0.0)
        self.assertAlmostEqual(unit_smape([0.0, 1.0], [0.0, 3.0]), 0.25)
        with self.assertRaises(InputValidationError):
            unit_smape([1.0], [1.0, 2.0])

    def test_leaf_variance(self):
        self.assertEqual(leaf_variance([1.0]), 0.0)
        self.assertAlmostEqual(leaf_variance([1.0, -1.0]), 2.0)

    def test_worked_values(self):
        self.assertAlmostEqual(unit_smape([2.0, 2.0], [1.0, 2.0]), 1.0 / 6.0)
        self.assertAlmostEqual(leaf_variance([1.0, 3.0]), 2.0)

    def test_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            a, b = rng.normal(scale=5.0, size=(2, 4))
            self.assertTrue(0.0 <= unit_smape(a, b) <= 1.0)

    def test_unit_smape_symmetric(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            a, b = rng.normal(scale=3.0, size=(2, 6))
            self.assertAlmostEqual(unit_smape(a, b), unit_smape(b, a), places=12)

    def test_mahalanobis_affine_invariant(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((300, 2))
        t = rng.integers(0, 2, 300).astype(float)
        A = np.array([[2.0, 0.5], [0.3, 1.5]])
        b = np.array([5.0, -3.0])
        original = mahalanobis_balance(Dataset(X, t, np.zeros(300)))
        transformed = mahalanobis_balance(Dataset(X @ A + b, t, np.zeros(300)))
        np.testing.assert_allclose(transformed, original, rtol=1e-3)

    def test_mahalanobis_one_feature(self):
        data = Dataset([[2.0], [4.0], [0.0], [2.0]], [1.0, 1.0, 0.0, 0.0], np.zeros(4))
        # distances 1, 3, 3, 1 over the pooled sd sqrt(8 / 3)
        self.assertAlmostEqual(mahalanobis_balance(data), 2.0 / np.sqrt(8.0 / 3.0), places=5)
        swapped = Dataset(data.features, 1.0 - data.treatment, data.outcome)
        self.assertAlmostEqual(mahalanobis_balance(swapped), mahalanobis_balance(data))

    def test_mahalanobis_balance(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((200, 2))
        t = np.tile([0.0, 1.0], 100)
        balanced = mahalanobis_balance(Dataset(X, t, np.zeros(200)))
        shifted = mahalanobis_balance(Dataset(X + 3.0 * t[:, None], t, np.zeros(200)))
        self.assertGreater(balanced, 0.0)
        self.assertGreater(shifted, balanced)

    def test_mahalanobis_degenerate(self):
        X = np.random.default_rng(1).standard_normal((10, 2))
        with self.assertRaises(DegenerateGroup):
            mahalanobis_balance(Dataset(X, np.ones(10), np.zeros(10)))
        with self.assertRaises(DegenerateGroup):
            mahalanobis_balance(Dataset(X[:2], [0.0, 1.0], [0.0, 0.0]))


class TestTreeReport(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model = default_model(seed=0, noise_sd=0.0)
        cls.split = split_dataset(generate(cls.model, 600), validation_fraction=0.3, test_fraction=0.2, seed=0)
        cls.tree = train(cls.split, LearnerConfig(criterion=CriterionConfig(kind='A'), max_depth=2))

    def test_perfect_fit_on_training_data(self):
        self.assertLess(ace_error(self.tree, self.split.train), 1e-9)

    def test_report_fields(self):
        report = evaluate_tree(self.tree, self.split.test)
        self.assertEqual(report.n_leaves, len(leaves(self.tree)))
        self.assertEqual(len(report.per_leaf), report.n_leaves)
        self.assertIsNotNone(report.unit_smape)
        self.assertGreaterEqual(report.ace_error, 0.0)
        self.assertLessEqual(report.ace_error, 1.0)
        self.assertIn('mahalanobis_balance', report.to_dict())

    def test_without_true_effect(self):
        test = self.split.test
        plain = Dataset(test.features, test.treatment, test.outcome)
        report = evaluate_tree(self.tree, plain)
        self.assertIsNone(report.unit_smape)
        self.assertNotIn('unit_smape', report.to_dict())

    def test_selected_leaves(self):
        largest = [max(leaves(self.tree), key=lambda leaf: leaf.n)]
        report = evaluate_tree(self.tree, self.split.test, largest)
        self.assertEqual(report.n_leaves, 1)
        self.assertEqual(report.leaf_variance, 0.0)


class TestSkippedLeaves(unittest.TestCase):
    def setUp(self):
        self.leaf = TreeNode(node_id=1, depth=0, score=0.0, ace=1.0, trigger=5.0, n_treated=1, n_control=1,
                             dimension=1)

    def test_empty_arm_is_skipped(self):
        test = Dataset(np.zeros((3, 1)), [6.0, 7.0, 8.0], [1.0, 1.0, 1.0])
        rows = leaf_effects(self.leaf, test)
        self.assertTrue(rows[0].skipped)
        self.assertTrue(np.isnan(rows[0].tau_test))
        with self.assertRaises(EmptyData):
            ace_error(self.leaf, test)

    def test_leaf_error(self):
        test = Dataset(np.zeros((4, 1)), [1.0, 2.0, 6.0, 7.0], [0.0, 0.0, 3.0, 3.0])
        # |1 - 3| / (1 + 3)
        self.assertAlmostEqual(ace_error(self.leaf, test), 0.5)


def random_two_leaf_tree(rng):
    trigger = float(rng.uniform(2.0, 8.0))
    root = TreeNode(node_id=1, depth=0, score=0.0, ace=0.0, trigger=trigger, n_treated=1, n_control=1, dimension=1,
                    rule=SplitRule(feature=0, threshold=float(rng.uniform(0.3, 0.7))))
    root.left = TreeNode(node_id=2, depth=1, score=0.0, ace=float(rng.normal(scale=2.0)),
                         trigger=float(rng.uniform(2.0, 8.0)), n_treated=1, n_control=1, dimension=1)
    root.right = TreeNode(node_id=3, depth=1, score=0.0, ace=float(rng.normal(scale=2.0)),
                          trigger=float(rng.uniform(2.0, 8.0)), n_treated=1, n_control=1, dimension=1)
    return root


class TestAceErrorRange(unittest.TestCase):
    def test_within_unit_interval(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            n = 200
            test = Dataset(rng.uniform(size=(n, 1)), rng.uniform(0.0, 10.0, n), rng.normal(scale=3.0, size=n))
            error = ace_error(random_two_leaf_tree(rng), test)
            self.assertGreaterEqual(error, 0.0)
            self.assertLessEqual(error, 1.0)


class TestCompareMethods(unittest.TestCase):
    def test_table(self):
        table = compare_methods({'CT-A': [1.0, 1.1, 0.9], 'CT-L': [0.2, 0.25, 0.15], 'CT-H': [1.0, 1.2, 0.8]})
        self.assertAlmostEqual(table.loc['CT-A', 'mean'], 1.0)
        self.assertEqual(table.loc['CT-A', 'n'], 3)
        self.assertTrue(table.loc['CT-A', 'sig_vs_CT-L'])
        self.assertFalse(table.loc['CT-A', 'sig_vs_CT-H'])
        self.assertFalse(table.loc['CT-L', 'sig_vs_CT-L'])


if __name__ == "__main__":
    unittest.main()
