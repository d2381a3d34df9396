'''
Unit testing for significance testing and pruning

Tests:
    Welch t-test
    p-value annotation on held-out units
    bottom-up collapse
    significant leaves
'''

import unittest

import numpy as np
import pytest
from scipy import stats

from trigtree.toolbox.data import DataSplit, Dataset, split_dataset
from trigtree.toolbox.errors import DegenerateGroup, InputValidationError, NoVariation
from trigtree.toolbox.estimators import CriterionConfig
from trigtree.toolbox.learner import LearnerConfig, SplitRule, TreeNode, count_nodes, leaves, train
from trigtree.toolbox.pruning import (annotate_p_values, prune, sd_overlap_significant, significant_leaves,
                                      welch_t_test)
from trigtree.toolbox.synthetic import default_model, generate, null_model


def two_leaf_tree(trigger=5.0):
    root = TreeNode(node_id=1, depth=0, score=0.0, ace=0.0, trigger=trigger, n_treated=1, n_control=1, dimension=1,
                    rule=SplitRule(feature=0, threshold=0.5))
    root.left = TreeNode(node_id=2, depth=1, score=0.0, ace=0.0, trigger=trigger, n_treated=1, n_control=1,
                         dimension=1)
    root.right = TreeNode(node_id=3, depth=1, score=0.0, ace=0.0, trigger=trigger, n_treated=1, n_control=1,
                          dimension=1)
    return root


def grid_dataset(left_effect, right_effect, n=200):
    # feature on a grid, treatment cycling through 0..9, noiseless step at t = 5
    x = (np.arange(n) % 100) / 100.0
    t = np.arange(n) % 10.0
    y = np.where(x <= 0.5, left_effect, right_effect) * (t >= 5)
    return Dataset(x[:, None], t, y)


def grid_split(left_effect, right_effect):
    return split_dataset(grid_dataset(left_effect, right_effect), validation_fraction=0.5, seed=0)


class TestWelch(unittest.TestCase):
    def test_matches_scipy(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0.3, 1.0, 25)
        b = rng.normal(0.0, 2.0, 40)
        result = welch_t_test(a, b)
        reference = stats.ttest_ind(a, b, equal_var=False)
        self.assertAlmostEqual(result.t_statistic, reference.statistic, places=10)
        self.assertAlmostEqual(result.p_value, reference.pvalue, places=10)

    def test_zero_variance(self):
        self.assertEqual(welch_t_test([1, 1], [1, 1, 1]).p_value, 1.0)
        self.assertEqual(welch_t_test([2, 2], [1, 1, 1]).p_value, 0.0)

    def test_swapping_groups_negates_t(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = rng.normal(rng.normal(), 1.0, int(rng.integers(2, 30)))
            b = rng.normal(rng.normal(), 2.0, int(rng.integers(2, 30)))
            forward, backward = welch_t_test(a, b), welch_t_test(b, a)
            self.assertAlmostEqual(forward.t_statistic, -backward.t_statistic, places=12)
            self.assertAlmostEqual(forward.p_value, backward.p_value, places=12)

    def test_too_small(self):
        with self.assertRaises(DegenerateGroup):
            welch_t_test([1.0], [1.0, 2.0])


class TestPrune(unittest.TestCase):
    def test_annotate_leaves_input_untouched(self):
        tree = two_leaf_tree()
        annotated = annotate_p_values(tree, grid_split(1.0, 0.0))
        self.assertIsNone(tree.left.p_value)
        self.assertEqual(annotated.left.p_value, 0.0)
        self.assertEqual(annotated.right.p_value, 1.0)

    def test_collapse_non_significant(self):
        tree = two_leaf_tree()
        pruned = prune(tree, grid_split(0.0, 0.0), alpha=0.05)
        self.assertTrue(pruned.is_leaf)
        self.assertEqual(pruned.node_id, 1)
        self.assertEqual(pruned.trigger, tree.trigger)
        self.assertFalse(tree.is_leaf)

    def test_keep_significant(self):
        pruned = prune(two_leaf_tree(), grid_split(1.0, 0.0), alpha=0.05)
        self.assertEqual(count_nodes(pruned), 3)
        self.assertEqual([leaf.node_id for leaf in significant_leaves(pruned, 0.05)], [2])

    def test_alpha_range(self):
        with self.assertRaises(InputValidationError):
            prune(two_leaf_tree(), grid_split(0.0, 0.0), alpha=0.0)

    def test_planted_tree_survives(self):
        data = generate(default_model(seed=2), 1000)
        split = split_dataset(data, validation_fraction=0.3, test_fraction=0.2, seed=2)
        tree = train(split, LearnerConfig(criterion=CriterionConfig(kind='L'), max_depth=1))
        pruned = prune(tree, split, alpha=0.05, kind='L')
        self.assertEqual(count_nodes(pruned), count_nodes(tree))
        self.assertTrue(all(leaf.p_value < 1e-6 for leaf in leaves(pruned)))

    def test_warns_when_growth_used_validation(self):
        data = generate(default_model(seed=2), 600)
        split = split_dataset(data, validation_fraction=0.3, seed=2)
        tree = train(split, LearnerConfig(criterion=CriterionConfig(kind='L'), max_depth=1))
        with self.assertLogs('trigtree.toolbox.pruning', level='WARNING'):
            prune(tree, split, alpha=0.05, kind='L')

    def test_prune_is_idempotent(self):
        data = generate(null_model(seed=3), 600)
        split = split_dataset(data, validation_fraction=0.3, seed=3)
        tree = train(split, LearnerConfig(criterion=CriterionConfig(kind='A'), max_depth=3))
        once = prune(tree, split, alpha=0.05, kind='A')
        twice = prune(once, split, alpha=0.05, kind='A')
        self.assertEqual(count_nodes(twice), count_nodes(once))
        self.assertEqual([leaf.node_id for leaf in leaves(twice)], [leaf.node_id for leaf in leaves(once)])
        self.assertEqual([leaf.p_value for leaf in leaves(twice)], [leaf.p_value for leaf in leaves(once)])


class TestHeldOutTesting(unittest.TestCase):
    def test_training_effect_is_not_tested(self):
        # effect on the left in the training part only
        split = DataSplit(train=grid_dataset(1.0, 0.0), validation=grid_dataset(0.0, 0.0), estimation=None,
                          test=None, seed=0, validation_fraction=0.5)
        annotated = annotate_p_values(two_leaf_tree(), split, kind='A')
        self.assertEqual(annotated.left.p_value, 1.0)
        self.assertTrue(prune(two_leaf_tree(), split, alpha=0.05, kind='A').is_leaf)

    def test_estimation_part_first(self):
        split = DataSplit(train=grid_dataset(0.0, 0.0), validation=grid_dataset(0.0, 0.0),
                          estimation=grid_dataset(0.0, 1.0), test=None, seed=0, validation_fraction=0.5)
        annotated = annotate_p_values(two_leaf_tree(), split, kind='L')
        self.assertEqual(annotated.left.p_value, 1.0)
        self.assertEqual(annotated.right.p_value, 0.0)

    @pytest.mark.slow
    def test_null_data_calibration(self):
        alpha = 0.05
        grown, significant = 0, 0
        for seed in range(200):
            data = generate(null_model(noise_sd=1.0, seed=seed), 1000)
            split = split_dataset(data, validation_fraction=0.3, seed=seed)
            try:
                tree = train(split, LearnerConfig(criterion=CriterionConfig(kind='A'), max_depth=2))
            except NoVariation:
                continue
            pruned = prune(tree, split, alpha, 'A')
            grown += len(leaves(tree))
            significant += len(significant_leaves(pruned, alpha))
        self.assertGreater(grown, 200)
        self.assertLessEqual(significant / grown, 0.10)


class TestSignificantLeaves(unittest.TestCase):
    def test_requires_p_values(self):
        with self.assertRaises(InputValidationError):
            significant_leaves(two_leaf_tree(), 0.05)

    def test_alpha_one_keeps_all(self):
        annotated = annotate_p_values(two_leaf_tree(), grid_split(1.0, 0.0))
        self.assertEqual(len(significant_leaves(annotated, 1.0)), 2)

    def test_sd_overlap(self):
        self.assertTrue(sd_overlap_significant(0.0, 0.1, 1.0, 0.1))
        self.assertFalse(sd_overlap_significant(0.0, 0.6, 1.0, 0.6))


if __name__ == "__main__":
    unittest.main()
