# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Significance testing and pruning of causal trees.

Methods:
--------
welch_t_test
significance_part
node_outcomes
annotate_p_values
prune
significant_leaves
sd_overlap_significant
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from trigtree.toolbox.errors import DegenerateGroup, InputValidationError
from trigtree.toolbox.estimators import CriterionKind, treated_mask
from trigtree.toolbox.learner import TreeNode, iter_nodes, leaves, route

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    dof: float
    p_value: float


def welch_t_test(treated_outcomes, control_outcomes):
    '''
    Two-sided Welch (unequal variance) t-test of the difference in means.

    With both sample variances zero the p-value is 1 for equal means and 0
    otherwise.

    Parameters:
    -----------
    treated_outcomes: list-like, at least 2 values
    control_outcomes: list-like, at least 2 values

    Returns:
    --------
    TTestResult
    '''
    y1 = np.asarray(treated_outcomes, dtype=float)
    y0 = np.asarray(control_outcomes, dtype=float)
    n1, n0 = len(y1), len(y0)
    if n1 < 2 or n0 < 2:
        raise DegenerateGroup('t-test needs at least 2 values per group, got {} and {}'.format(n1, n0))

    m1, m0 = np.mean(y1), np.mean(y0)
    a1 = np.var(y1, ddof=1) / n1
    a0 = np.var(y0, ddof=1) / n0
    se2 = a1 + a0

    if se2 == 0.0:
        if m1 == m0:
            return TTestResult(t_statistic=0.0, dof=float(n1 + n0 - 2), p_value=1.0)
        return TTestResult(t_statistic=float(np.sign(m1 - m0) * np.inf), dof=float(n1 + n0 - 2), p_value=0.0)

    t = (m1 - m0) / np.sqrt(se2)
    dof = se2**2 / (a1**2 / (n1 - 1) + a0**2 / (n0 - 1))
    # two-sided Student-t tail: I_{dof / (dof + t^2)}(dof / 2, 1 / 2)
    p = special.betainc(dof / 2.0, 0.5, dof / (dof + t**2))
    return TTestResult(t_statistic=float(t), dof=float(dof), p_value=float(np.clip(p, 0.0, 1.0)))


def significance_part(data, kind=None):
    '''
    Name of the DataSplit part significance tests run on: estimation when it
    exists, else validation, else train.
    '''
    kind = None if kind is None else CriterionKind.parse(kind)
    if data.estimation is not None and len(data.estimation) > 0:
        return 'estimation'
    if len(data.validation) > 0:
        if kind is not None and (kind.uses_cost or kind is CriterionKind.HONEST_VAL):
            logger.warning('{} trees are grown with the validation part; p-values tested on it are '
                           'optimistic without an estimation part'.format(kind.label))
        return 'validation'
    logger.warning('No validation or estimation units; p-values are tested on the training part')
    return 'train'


def node_outcomes(data, reached, node: TreeNode, part='validation'):
    '''
    Treated and control outcomes of the units of one part that reach a node.

    reached maps a part name to the output of route() on that part.
    '''
    samples = getattr(data, part)
    idx = reached[part][node.node_id]
    flags = treated_mask(samples.treatment[idx], node.trigger)
    return samples.outcome[idx][flags], samples.outcome[idx][~flags]


def annotate_p_values(tree: TreeNode, data, kind=None):
    '''
    Copy of tree with the Welch p-value of every node's effect filled in
    (nodes too small to test get p = 1). Tests use the units held out of
    growth, see significance_part.
    '''
    tree = tree.copy_tree()
    part = significance_part(data, kind)
    reached = {part: route(tree, getattr(data, part))}
    for node in iter_nodes(tree):
        treated, control = node_outcomes(data, reached, node, part)
        try:
            node.p_value = welch_t_test(treated, control).p_value
        except DegenerateGroup as e:
            logger.debug('Node {}: {}; p-value set to 1'.format(node.node_id, e))
            node.p_value = 1.0
    return tree


def _collapse(node: TreeNode, alpha):
    if node.is_leaf:
        return node, False
    left, changed_left = _collapse(node.left, alpha)
    right, changed_right = _collapse(node.right, alpha)
    node.left, node.right = left, right
    if left.is_leaf and right.is_leaf and left.p_value >= alpha and right.p_value >= alpha:
        logger.debug('Collapsing node {} (leaf p-values {:.3g}, {:.3g})'.format(node.node_id, left.p_value, right.p_value))
        return node.as_leaf(), True
    return node, changed_left or changed_right


def prune(tree: TreeNode, data, alpha=0.05, kind=None):
    '''
    Significance pruning: bottom-up, a node whose children are both leaves
    with non-significant effects (p >= alpha) becomes a leaf, keeping the
    effect and trigger it was given when grown; repeated to a fixpoint.

    Parameters:
    -----------
    tree: TreeNode
        trained tree (left untouched)
    data: DataSplit
        the split the tree was grown on
    alpha: float
        significance level
    kind: CriterionKind or str, optional
        the tree's criterion, only used to warn when the tested part took part in growth

    Returns:
    --------
    TreeNode, a pruned copy with p_value on every node
    '''
    if not (0.0 < alpha <= 1.0):
        raise InputValidationError('trigtree.toolbox.pruning: alpha must be in (0, 1], got {}'.format(alpha))
    pruned = annotate_p_values(tree, data, kind)
    changed = True
    while changed:
        pruned, changed = _collapse(pruned, alpha)
    logger.info('Pruned tree at alpha={}: {} -> {} leaves'.format(alpha, len(leaves(tree)), len(leaves(pruned))))
    return pruned


def significant_leaves(tree: TreeNode, alpha=0.05):
    '''
    Leaves with p_value < alpha, left to right; alpha >= 1 keeps every leaf.
    '''
    result = []
    for leaf in leaves(tree):
        if leaf.p_value is None:
            raise InputValidationError(
                'trigtree.toolbox.pruning: leaf {} has no p-value, annotate the tree first'.format(leaf.node_id))
        if alpha >= 1.0 or leaf.p_value < alpha:
            result.append(leaf)
    return result


def sd_overlap_significant(mean_a, sd_a, mean_b, sd_b):
    '''
    True when [mean_a - sd_a, mean_a + sd_a] and [mean_b - sd_b, mean_b + sd_b]
    do not intersect.
    '''
    if sd_a < 0 or sd_b < 0:
        raise InputValidationError('trigtree.toolbox.pruning: standard deviations must be nonnegative')
    return bool(mean_a + sd_a < mean_b - sd_b or mean_b + sd_b < mean_a - sd_a)
