# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Greedy recursive partitioning for trigger-based causal trees.

A node is split on the (feature, threshold) pair that maximizes the sum of
the children's partition measures; in trigger mode each child is scored at
its own best trigger. Growth stops when no split improves on the parent's
own score by more than min_split_gain.

Classes:
--------
SplitRule
SplitCandidate
TreeNode
LearnerConfig

Methods:
--------
enumerate_splits
best_split
train
predict
predict_batch
prescribe
route
leaves
iter_nodes
tree_depth
count_nodes
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from trigtree.toolbox.data import DISCRETE, DataSplit, NodeSample
from trigtree.toolbox.errors import DegenerateGroup, EmptyData, InputValidationError, NoVariation
from trigtree.toolbox.estimators import TIE_RTOL, CriterionConfig, TriggerResult, node_effect, node_measure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitRule:
    feature: int
    threshold: float

    def goes_left(self, features):
        return features[self.feature] <= self.threshold


@dataclass(frozen=True)
class SplitCandidate:
    rule: SplitRule
    left_score: float
    right_score: float
    left_result: TriggerResult
    right_result: TriggerResult

    @property
    def total(self):
        return self.left_score + self.right_score


@dataclass(eq=False)
class TreeNode:
    """
    Internal node (rule set, both children) or leaf (no rule, no children).

    Node ids are heap ordered: the root is 1 and the children of node i are
    2i (left) and 2i + 1 (right).
    """
    node_id: int
    depth: int
    score: float
    ace: float
    trigger: Optional[float]
    n_treated: int
    n_control: int
    p_value: Optional[float] = None
    rule: Optional[SplitRule] = None
    left: Optional['TreeNode'] = None
    right: Optional['TreeNode'] = None
    dimension: Optional[int] = None
    sample: Optional[NodeSample] = field(default=None, repr=False)

    @property
    def is_leaf(self):
        return self.rule is None

    @property
    def n(self):
        return self.n_treated + self.n_control

    def as_leaf(self, **changes):
        '''
        Copy of this node with its subtree removed.
        '''
        return dataclasses.replace(self, rule=None, left=None, right=None, **changes)

    def copy_tree(self):
        if self.is_leaf:
            return dataclasses.replace(self)
        return dataclasses.replace(self, left=self.left.copy_tree(), right=self.right.copy_tree())


@dataclass(frozen=True)
class LearnerConfig:
    """
    Parameters:
    -----------
    criterion: CriterionConfig
    min_group_size: int
        per child, per treatment arm, on the training subsample
    max_depth: int, optional
        0 keeps the root as the only leaf; None grows until no split improves
    min_split_gain: float
        required improvement of the children's summed score over the parent
    min_heldout_size: int
        per child, per arm, on the validation/estimation subsamples the criterion uses
    min_arm_share: float
        in trigger mode, each arm of every subsample a candidate trigger is scored on
        needs at least this share of the node's units in that subsample
    """
    criterion: CriterionConfig = field(default_factory=CriterionConfig)
    min_group_size: int = 5
    max_depth: Optional[int] = None
    min_split_gain: float = 0.0
    min_heldout_size: int = 1
    min_arm_share: float = 0.1

    def __post_init__(self):
        if int(self.min_group_size) < 2:
            raise InputValidationError('trigtree.toolbox.learner: min_group_size must be >= 2, got {}'.format(
                self.min_group_size))
        if self.max_depth is not None and int(self.max_depth) < 0:
            raise InputValidationError('trigtree.toolbox.learner: max_depth must be nonnegative')
        if self.min_split_gain < 0:
            raise InputValidationError('trigtree.toolbox.learner: min_split_gain must be nonnegative')
        if int(self.min_heldout_size) < 0:
            raise InputValidationError('trigtree.toolbox.learner: min_heldout_size must be nonnegative')
        if not (0.0 <= self.min_arm_share < 0.5):
            raise InputValidationError('trigtree.toolbox.learner: min_arm_share must be in [0, 0.5), got {}'.format(
                self.min_arm_share))


def enumerate_splits(node: NodeSample, data: DataSplit, feature):
    '''
    Candidate split rules on one feature, ascending by threshold.

    Continuous features split at midpoints between consecutive distinct
    training values; discrete features split at each level except the
    largest (x <= level goes left).
    '''
    values = np.unique(data.train.features[node.train_idx, feature])
    if len(values) < 2:
        return []
    if data.train.feature_kinds[feature] == DISCRETE:
        thresholds = values[:-1]
    else:
        thresholds = (values[:-1] + values[1:]) / 2.0
    return [SplitRule(feature=int(feature), threshold=float(v)) for v in thresholds]


def _child_measure(child, data, config: LearnerConfig):
    try:
        return node_measure(child, data, config.criterion,
                            min_group_size=config.min_group_size,
                            min_heldout_size=config.min_heldout_size,
                            min_arm_share=config.min_arm_share)
    except DegenerateGroup:
        return None


def best_split(node: NodeSample, data: DataSplit, config: LearnerConfig):
    '''
    Best (feature, threshold) split of a node.

    Returns:
    --------
    SplitCandidate, or None when no candidate satisfies the group-size
    constraints. Ties go to the lowest feature index, then the lowest threshold.
    '''
    best = None
    x_train = data.train.features[node.train_idx]
    for feature in range(data.dimension):
        column = np.sort(x_train[:, feature])
        for rule in enumerate_splits(node, data, feature):
            # both arms of both children need min_group_size training units
            n_left = int(np.searchsorted(column, rule.threshold, side='right'))
            if min(n_left, len(column) - n_left) < 2 * config.min_group_size:
                continue

            left, right = node.split(rule, data)
            left_result = _child_measure(left, data, config)
            if left_result is None:
                continue
            right_result = _child_measure(right, data, config)
            if right_result is None:
                continue

            candidate = SplitCandidate(rule, left_result.score, right_result.score, left_result, right_result)
            if best is None or candidate.total > best.total + TIE_RTOL * abs(best.total):
                best = candidate
    return best


def _check_trainable(data: DataSplit, config: LearnerConfig):
    if len(data.train) == 0:
        raise EmptyData('trigtree.toolbox.learner: training set is empty')
    t = data.train.treatment
    if config.criterion.trigger_mode:
        if len(np.unique(t)) < 2:
            raise NoVariation('trigtree.toolbox.learner: trigger mode needs at least 2 distinct treatment values')
    elif np.all(t != 0) or np.all(t == 0):
        raise NoVariation('trigtree.toolbox.learner: binary mode needs both treated (t != 0) and control (t == 0) units')


def _root_measure(root, data, config: LearnerConfig):
    try:
        return node_measure(root, data, config.criterion, config.min_group_size, config.min_heldout_size,
                            config.min_arm_share)
    except DegenerateGroup as e:
        logger.warning('Root violates the group-size constraints ({}); scoring it unconstrained'.format(e))
    try:
        return node_measure(root, data, config.criterion)
    except DegenerateGroup as e:
        raise NoVariation('trigtree.toolbox.learner: the root cannot be scored with {}: {}'.format(
            config.criterion.kind.label, e))


class _Grower():
    def __init__(self, data: DataSplit, config: LearnerConfig):
        self.data = data
        self.config = config

    def make_node(self, sample, result: TriggerResult, depth, node_id):
        ace = node_effect(sample, self.data, self.config.criterion, result.trigger, fallback=result.ace)
        return TreeNode(
            node_id=node_id,
            depth=depth,
            score=result.score,
            ace=float(ace),
            trigger=result.trigger,
            n_treated=result.stats.n_treated,
            n_control=result.stats.n_control,
            dimension=self.data.dimension,
            sample=sample,
        )

    def grow(self, sample, result, depth=0, node_id=1):
        node = self.make_node(sample, result, depth, node_id)
        if self.config.max_depth is not None and depth >= self.config.max_depth:
            return node

        candidate = best_split(sample, self.data, self.config)
        if candidate is None:
            logger.debug('Node %d: no valid split', node_id)
            return node
        if not candidate.total > result.score + self.config.min_split_gain:
            logger.debug('Node %d: best split on feature %d at %g does not improve (%g <= %g)',
                         node_id, candidate.rule.feature, candidate.rule.threshold, candidate.total, result.score)
            return node

        logger.debug('Node %d: split feature %d <= %g, score %g -> %g + %g', node_id, candidate.rule.feature,
                     candidate.rule.threshold, result.score, candidate.left_score, candidate.right_score)
        left_sample, right_sample = sample.split(candidate.rule, self.data)
        node.rule = candidate.rule
        node.left = self.grow(left_sample, candidate.left_result, depth + 1, 2 * node_id)
        node.right = self.grow(right_sample, candidate.right_result, depth + 1, 2 * node_id + 1)
        return node


def train(data: DataSplit, config: LearnerConfig):
    '''
    Grow a trigger-based causal tree on a DataSplit.

    Parameters:
    -----------
    data: DataSplit
        validation and estimation indices are routed down the same rules as training
    config: LearnerConfig

    Returns:
    --------
    TreeNode, the root
    '''
    _check_trainable(data, config)
    logger.info('Growing {} tree: {} training, {} validation, {} estimation samples'.format(
        config.criterion.kind.label, len(data.train), len(data.validation),
        0 if data.estimation is None else len(data.estimation)))

    root_sample = NodeSample.root(data)
    tree = _Grower(data, config).grow(root_sample, _root_measure(root_sample, data, config))

    logger.info('Grown tree has depth {} and {} leaves'.format(tree_depth(tree), len(leaves(tree))))
    return tree


# ---------------------------------------------------------------------------
# Traversal and prediction
# ---------------------------------------------------------------------------

def iter_nodes(tree: TreeNode):
    '''
    Pre-order traversal (node, left subtree, right subtree).
    '''
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if not node.is_leaf:
            stack.append(node.right)
            stack.append(node.left)


def leaves(tree: TreeNode):
    return [node for node in iter_nodes(tree) if node.is_leaf]


def tree_depth(tree: TreeNode):
    return max(node.depth for node in leaves(tree)) - tree.depth


def count_nodes(tree: TreeNode):
    return sum(1 for _ in iter_nodes(tree))


def _check_dimension(tree, n_features):
    if tree.dimension is not None and n_features != tree.dimension:
        raise InputValidationError('trigtree.toolbox.learner: expected {} features, got {}'.format(
            tree.dimension, n_features))
    max_feature = max((node.rule.feature for node in iter_nodes(tree) if not node.is_leaf), default=-1)
    if n_features <= max_feature:
        raise InputValidationError('trigtree.toolbox.learner: tree splits on feature {} but only {} given'.format(
            max_feature, n_features))


def find_leaf(tree: TreeNode, features):
    node = tree
    while not node.is_leaf:
        node = node.left if node.rule.goes_left(features) else node.right
    return node


def predict(tree: TreeNode, features):
    '''
    Leaf (ace, trigger) for one feature vector.
    '''
    features = np.asarray(features, dtype=float).reshape(-1)
    _check_dimension(tree, len(features))
    leaf = find_leaf(tree, features)
    return leaf.ace, leaf.trigger


def prescribe(tree: TreeNode, features):
    '''
    Minimum treatment to apply: the leaf trigger when the leaf effect is
    positive, None otherwise (and always None for a binary-treatment tree).
    '''
    ace, trigger = predict(tree, features)
    if ace > 0:
        return trigger
    return None


def route(tree: TreeNode, features):
    '''
    Rows of a feature matrix (or Dataset) reaching each node.

    Returns:
    --------
    dict of node_id -> ascending row index array, for every node
    '''
    X = getattr(features, 'features', features)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputValidationError('trigtree.toolbox.learner: route needs a 2-D feature matrix')
    _check_dimension(tree, X.shape[1])

    reached = {}
    stack = [(tree, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        reached[node.node_id] = idx
        if not node.is_leaf:
            goes_left = X[idx, node.rule.feature] <= node.rule.threshold
            stack.append((node.right, idx[~goes_left]))
            stack.append((node.left, idx[goes_left]))
    return reached


def predict_batch(tree: TreeNode, features):
    '''
    Vectorised predict over the rows of a feature matrix (or Dataset).

    Returns:
    --------
    ace: np.ndarray
    trigger: np.ndarray (nan where the leaf has no trigger)
    '''
    reached = route(tree, features)
    n = len(reached[tree.node_id])
    ace = np.full(n, np.nan)
    trigger = np.full(n, np.nan)
    for leaf in leaves(tree):
        idx = reached[leaf.node_id]
        ace[idx] = leaf.ace
        trigger[idx] = np.nan if leaf.trigger is None else leaf.trigger
    return ace, trigger
