'''
Unit testing for tree learning and prediction

Tests:
    split enumeration
    planted subgroup recovery
    stopping rules and node ids
    exhaustive search oracles
    tree invariants
    planted-model behaviour across seeds
    prediction, prescription and routing
'''

import unittest

import numpy as np
import pytest
from scipy import stats

from trigtree.toolbox.data import DISCRETE, DataSplit, Dataset, NodeSample, split_dataset
from trigtree.toolbox.errors import DegenerateGroup, EmptyData, InputValidationError, NoVariation
from trigtree.toolbox.estimators import CriterionConfig, find_trigger, trigger_candidates
from trigtree.toolbox.evaluation import ace_error
from trigtree.toolbox.learner import (LearnerConfig, best_split, count_nodes, enumerate_splits, iter_nodes, leaves,
                                      predict, predict_batch, prescribe, route, train, tree_depth)
from trigtree.toolbox.synthetic import default_model, generate


def subset(samples, idx):
    return Dataset(samples.features[idx], samples.treatment[idx], samples.outcome[idx])


def planted_split(seed=0, n=2000):
    data = generate(default_model(seed=seed), n)
    return split_dataset(data, validation_fraction=0.3, test_fraction=0.2, seed=seed)


class TestEnumerateSplits(unittest.TestCase):
    def setUp(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [2.0, 2.0]])
        data = Dataset(X, [0, 1, 2, 3], [0, 1, 0, 1], feature_kinds=['continuous', DISCRETE])
        self.split = split_dataset(data, validation_fraction=0.0)
        self.node = NodeSample.root(self.split)

    def test_continuous_midpoints(self):
        rules = enumerate_splits(self.node, self.split, 0)
        self.assertEqual([r.threshold for r in rules], [0.5, 1.5])

    def test_discrete_levels(self):
        rules = enumerate_splits(self.node, self.split, 1)
        self.assertEqual([r.threshold for r in rules], [0.0, 1.0])


class TestTrain(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.split = planted_split()
        cls.config = LearnerConfig(criterion=CriterionConfig(kind='L', lam=0.5), max_depth=1)
        cls.tree = train(cls.split, cls.config)

    def test_recovers_planted_split(self):
        tree = self.tree
        self.assertFalse(tree.is_leaf)
        self.assertEqual(tree.rule.feature, 0)
        self.assertLess(abs(tree.rule.threshold - 0.5), 0.05)

    def test_recovers_planted_triggers(self):
        left, right = self.tree.left, self.tree.right
        self.assertLess(abs(left.trigger - 3.0), 0.25)
        self.assertLess(abs(right.trigger - 7.0), 0.25)
        self.assertAlmostEqual(left.ace, 1.0, delta=0.1)
        self.assertAlmostEqual(right.ace, -1.0, delta=0.1)

    def test_heap_node_ids(self):
        self.assertEqual(self.tree.node_id, 1)
        self.assertEqual([leaf.node_id for leaf in leaves(self.tree)], [2, 3])
        self.assertEqual(tree_depth(self.tree), 1)
        self.assertEqual(count_nodes(self.tree), 3)
        self.assertEqual([node.node_id for node in iter_nodes(self.tree)], [1, 2, 3])

    def test_node_sizes(self):
        self.assertEqual(self.tree.n, len(self.split.train))
        self.assertEqual(self.tree.left.n + self.tree.right.n, self.tree.n)
        self.assertEqual(self.tree.left.sample.sizes[0], self.tree.left.n)

    def test_max_depth_zero(self):
        config = LearnerConfig(criterion=CriterionConfig(kind='A'), max_depth=0)
        tree = train(self.split, config)
        self.assertTrue(tree.is_leaf)
        self.assertEqual(len(leaves(tree)), 1)

    def test_deterministic(self):
        again = train(self.split, self.config)
        self.assertEqual(again.rule, self.tree.rule)
        self.assertEqual([leaf.trigger for leaf in leaves(again)], [leaf.trigger for leaf in leaves(self.tree)])

    def test_binary_mode(self):
        config = LearnerConfig(criterion=CriterionConfig(kind='A', trigger_mode=False), max_depth=1)
        data = Dataset(self.split.train.features, (self.split.train.treatment >= 5).astype(float),
                       self.split.train.outcome)
        tree = train(split_dataset(data, validation_fraction=0.3), config)
        self.assertTrue(all(leaf.trigger is None for leaf in leaves(tree)))


class TestTrainErrors(unittest.TestCase):
    def test_min_group_size(self):
        with self.assertRaises(InputValidationError):
            LearnerConfig(min_group_size=1)

    def test_constant_treatment(self):
        data = Dataset(np.random.default_rng(0).uniform(size=(20, 1)), np.full(20, 2.0), np.zeros(20))
        with self.assertRaises(NoVariation):
            train(split_dataset(data, validation_fraction=0.5), LearnerConfig())

    def test_binary_mode_without_controls(self):
        data = Dataset(np.zeros((6, 1)), [1, 2, 3, 1, 2, 3], np.zeros(6))
        config = LearnerConfig(criterion=CriterionConfig(trigger_mode=False))
        with self.assertRaises(NoVariation):
            train(split_dataset(data, validation_fraction=0.5), config)

    def test_empty_train(self):
        empty = Dataset(np.zeros((0, 1)), [], [])
        split = DataSplit(train=empty, validation=empty, estimation=None, test=None, seed=0, validation_fraction=0.5)
        with self.assertRaises(EmptyData):
            train(split, LearnerConfig())


class TestPredict(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        split = planted_split(seed=1)
        cls.tree = train(split, LearnerConfig(criterion=CriterionConfig(kind='L'), max_depth=1))

    def test_predict_and_prescribe(self):
        ace, trigger = predict(self.tree, [0.2, 0.7])
        self.assertGreater(ace, 0)
        self.assertEqual(prescribe(self.tree, [0.2, 0.7]), trigger)
        self.assertIsNone(prescribe(self.tree, [0.9, 0.7]))

    def test_batch_matches_single(self):
        X = np.random.default_rng(4).uniform(size=(50, 2))
        ace, trigger = predict_batch(self.tree, X)
        for i, x in enumerate(X):
            a, t = predict(self.tree, x)
            self.assertEqual(ace[i], a)
            self.assertEqual(trigger[i], t)

    def test_route_partitions_rows(self):
        X = np.random.default_rng(5).uniform(size=(30, 2))
        reached = route(self.tree, X)
        self.assertEqual(len(reached[1]), 30)
        self.assertEqual(sum(len(reached[leaf.node_id]) for leaf in leaves(self.tree)), 30)

    def test_dimension_mismatch(self):
        with self.assertRaises(InputValidationError):
            predict(self.tree, [0.1, 0.2, 0.3])


def arm_minimum(n, minimum, share=0.1):
    return max(minimum, int(np.ceil(share * n - 1e-9)))


def brute_best_trigger(t, y, min_group_size):
    # every distinct treatment value as a trigger, scored with plain means
    best = None
    floor = arm_minimum(len(y), min_group_size)
    for theta in np.unique(t):
        treated = t >= theta
        if treated.sum() < floor or (~treated).sum() < floor:
            continue
        score = len(y) * (y[treated].mean() - y[~treated].mean())**2
        if best is None or score > best[1]:
            best = (theta, score)
    return best


def brute_criterion(kind, theta, parts, split_sizes, lam, min_group_size):
    # straight-line F, F_C and honest penalty at one trigger; None when an arm is too small
    (t_tr, y_tr), (t_val, y_val), (t_held, y_held) = parts
    y1, y0 = y_tr[t_tr >= theta], y_tr[t_tr < theta]
    floor = arm_minimum(len(y_tr), min_group_size)
    if len(y1) < floor or len(y0) < floor:
        return None
    tau = y1.mean() - y0.mean()
    score = len(y_tr) * tau**2
    if kind in ('L', 'HL', 'HV'):
        v1, v0 = y_val[t_val >= theta], y_val[t_val < theta]
        floor = arm_minimum(len(y_val), 0)
        if len(v1) < floor or len(v0) < floor:
            return None
        cost = len(y_val) * abs(v1.mean() - v0.mean() - tau) if len(v1) and len(v0) else 0.0
        score = ((1 - lam) * score - lam * cost) / (abs(split_sizes[0] - split_sizes[1]) + 1)
    if kind in ('H', 'HL', 'HV'):
        h1, h0 = y_held[t_held >= theta], y_held[t_held < theta]
        floor = arm_minimum(len(y_held), 2)
        if len(h1) < floor or len(h0) < floor:
            return None
        p = len(h1) / len(y_held)
        scale = 1 + len(y_held) / (len(y_tr) + len(y_held))
        score -= scale * (np.var(h1, ddof=1) / p + np.var(h0, ddof=1) / (1 - p))
    return score


def brute_best_split(X, t, y, min_group_size):
    best = None
    for feature in range(X.shape[1]):
        values = np.unique(X[:, feature])
        for threshold in (values[:-1] + values[1:]) / 2.0:
            left = X[:, feature] <= threshold
            children = [brute_best_trigger(t[mask], y[mask], min_group_size) for mask in (left, ~left)]
            if None in children:
                continue
            total = children[0][1] + children[1][1]
            if best is None or total > best['total']:
                best = {'feature': feature, 'threshold': threshold, 'total': total,
                        'triggers': (children[0][0], children[1][0])}
    return best


class TestBruteForce(unittest.TestCase):
    def test_best_split_matches_exhaustive_search(self):
        rng = np.random.default_rng(11)
        config = LearnerConfig(criterion=CriterionConfig(kind='A'), min_group_size=2)
        checked = 0
        for _ in range(100):
            n = int(rng.integers(12, 51))
            d = int(rng.integers(1, 4))
            X = rng.uniform(size=(n, d))
            t = rng.integers(0, 6, size=n).astype(float)
            y = rng.standard_normal(n) + t * X[:, 0]
            split = split_dataset(Dataset(X, t, y), validation_fraction=0.0)

            found = best_split(NodeSample.root(split), split, config)
            expected = brute_best_split(split.train.features, split.train.treatment, split.train.outcome, 2)
            if expected is None:
                self.assertIsNone(found)
                continue
            checked += 1
            self.assertEqual(found.rule.feature, expected['feature'])
            self.assertEqual(found.rule.threshold, expected['threshold'])
            self.assertEqual((found.left_result.trigger, found.right_result.trigger), expected['triggers'])
            np.testing.assert_allclose(found.total, expected['total'], rtol=1e-12)
        self.assertGreater(checked, 90)

    def test_trigger_search_matches_exhaustive_search_for_every_kind(self):
        rng = np.random.default_rng(17)

        def random_part(n):
            t = rng.integers(0, 8, size=n).astype(float)
            return Dataset(rng.uniform(size=(n, 1)), t, rng.standard_normal(n) + 0.5 * (t >= 4))

        checked = 0
        for kind in ('L', 'H', 'HL', 'HV'):
            for _ in range(25):
                split = DataSplit(train=random_part(int(rng.integers(20, 51))),
                                  validation=random_part(int(rng.integers(15, 41))),
                                  estimation=random_part(int(rng.integers(15, 41))), test=None, seed=0,
                                  validation_fraction=0.5)
                config = CriterionConfig(kind=kind, lam=0.4)
                held = split.estimation if kind in ('H', 'HL') else split.validation
                parts = [(p.treatment, p.outcome) for p in (split.train, split.validation, held)]
                split_sizes = (len(split.train), len(split.validation))

                best = None
                for theta in np.unique(split.train.treatment):
                    score = brute_criterion(kind, theta, parts, split_sizes, 0.4, 2)
                    if score is not None and (best is None or score > best[1]):
                        best = (theta, score)

                node = NodeSample.root(split)
                if best is None:
                    with self.assertRaises(DegenerateGroup):
                        find_trigger(node, split, config, min_group_size=2, min_arm_share=0.1)
                    continue
                checked += 1
                result = find_trigger(node, split, config, min_group_size=2, min_arm_share=0.1)
                self.assertEqual(result.trigger, best[0])
                np.testing.assert_allclose(result.score, best[1], rtol=1e-9)
        self.assertGreater(checked, 80)


class TestTreeInvariants(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.split = planted_split(seed=3, n=1200)
        cls.config = LearnerConfig(criterion=CriterionConfig(kind='L', lam=0.5), max_depth=3)
        cls.tree = train(cls.split, cls.config)

    def test_children_improve_on_parent(self):
        internal = [node for node in iter_nodes(self.tree) if not node.is_leaf]
        self.assertTrue(internal)
        for node in internal:
            self.assertGreater(node.left.score + node.right.score, node.score + self.config.min_split_gain)

    def test_leaf_matches_fresh_trigger_search(self):
        config = self.config
        for leaf in leaves(self.tree):
            result = find_trigger(leaf.sample, self.split, config.criterion, config.min_group_size,
                                  config.min_heldout_size, config.min_arm_share)
            self.assertEqual(leaf.trigger, result.trigger)
            self.assertEqual(leaf.ace, result.ace)
            self.assertEqual(leaf.score, result.score)

    def test_row_order_does_not_matter(self):
        rng = np.random.default_rng(21)
        train_perm = rng.permutation(len(self.split.train))
        val_perm = rng.permutation(len(self.split.validation))
        shuffled = DataSplit(train=subset(self.split.train, train_perm),
                             validation=subset(self.split.validation, val_perm), estimation=None, test=None,
                             seed=self.split.seed, validation_fraction=self.split.validation_fraction)
        again = train(shuffled, self.config)
        self.assertEqual([(node.node_id, node.rule) for node in iter_nodes(again)],
                         [(node.node_id, node.rule) for node in iter_nodes(self.tree)])
        self.assertEqual([leaf.trigger for leaf in leaves(again)], [leaf.trigger for leaf in leaves(self.tree)])
        np.testing.assert_allclose([leaf.ace for leaf in leaves(again)], [leaf.ace for leaf in leaves(self.tree)],
                                   rtol=1e-9)


def leaf_trigger_steps(split, child, planted):
    cands = trigger_candidates(split.train.treatment[child.sample.train_idx])
    return abs(int(np.searchsorted(cands, child.trigger)) - int(np.searchsorted(cands, planted)))


def held_out_errors(kind, seeds, noise_sd=0.1, max_depth=1, **criterion):
    errors = []
    for seed in seeds:
        data = generate(default_model(seed=seed, noise_sd=noise_sd), 2000)
        split = split_dataset(data, validation_fraction=0.3, test_fraction=0.2, seed=seed)
        config = LearnerConfig(criterion=CriterionConfig(kind=kind, lam=0.5, **criterion), max_depth=max_depth)
        try:
            errors.append(ace_error(train(split, config), split.test))
        except EmptyData:
            errors.append(np.nan)
    return np.array(errors)


@pytest.mark.slow
class TestPlantedModel(unittest.TestCase):
    def test_recovers_planted_triggers_across_seeds(self):
        recovered = 0
        for seed in range(20):
            split = planted_split(seed=seed)
            tree = train(split, LearnerConfig(criterion=CriterionConfig(kind='L', lam=0.5), max_depth=1))
            if tree.is_leaf or tree.rule.feature != 0:
                continue
            if leaf_trigger_steps(split, tree.left, 3.0) <= 1 and leaf_trigger_steps(split, tree.right, 7.0) <= 1:
                recovered += 1
        self.assertGreaterEqual(recovered, 18)

    def test_learn_beats_adaptive_on_noisy_outcomes(self):
        adaptive = held_out_errors('A', range(20), noise_sd=0.5, max_depth=None)
        learn = held_out_errors('L', range(20), noise_sd=0.5, max_depth=None)
        self.assertLessEqual(np.nanmean(learn), np.nanmean(adaptive))

    def test_error_does_not_grow_with_trigger_candidates(self):
        caps = [2, 5, 10, 50, None]
        errors = [held_out_errors('L', range(20), max_trigger_candidates=cap) for cap in caps]
        means = [np.nanmean(e) for e in errors]
        self.assertLessEqual(stats.spearmanr(np.arange(len(caps)), means).correlation, 0.0)
        uncapped = errors[-1]
        se = np.nanstd(uncapped, ddof=1) / np.sqrt(np.sum(~np.isnan(uncapped)))
        self.assertLessEqual(means[-1], min(means[:-1]) + se)


if __name__ == "__main__":
    unittest.main()
