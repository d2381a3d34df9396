# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Evaluation metrics for causal trees: leaf ACE error, per-unit SMAPE,
variance of leaf effects and Mahalanobis covariate balance.

Classes:
--------
LeafEffect
EffectReport

Methods:
--------
leaf_effects
ace_error
unit_smape
leaf_variance
mahalanobis_balance
tree_mahalanobis
evaluate_tree
compare_methods
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from trigtree.toolbox.data import Dataset, subset
from trigtree.toolbox.errors import DegenerateGroup, EmptyData, InputValidationError
from trigtree.toolbox.estimators import treated_mask
from trigtree.toolbox.learner import TreeNode, leaves as tree_leaves, route
from trigtree.toolbox.pruning import sd_overlap_significant

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LeafEffect:
    leaf_id: int
    n: int
    tau_hat: float
    tau_test: float
    p_value: Optional[float]
    skipped: bool = False


@dataclass
class EffectReport:
    ace_error: float
    leaf_variance: float
    mahalanobis_balance: float
    unit_smape: Optional[float] = None
    per_leaf: List[LeafEffect] = field(default_factory=list)
    n_leaves: int = 0
    n_skipped: int = 0

    def to_dict(self):
        out = {'ace_error': self.ace_error,
               'unit_smape': self.unit_smape,
               'leaf_variance': self.leaf_variance,
               'mahalanobis_balance': self.mahalanobis_balance,
               'n_leaves': self.n_leaves,
               'n_skipped': self.n_skipped}
        return {k: v for k, v in out.items() if v is not None}


def _smape_terms(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.abs(a) + np.abs(b)
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.abs(a - b) / denom
    return np.where(denom == 0.0, 0.0, terms)


def _selected(tree, leaves):
    selected = tree_leaves(tree) if leaves is None else list(leaves)
    return sorted(selected, key=lambda leaf: leaf.node_id)


def leaf_effects(tree: TreeNode, test: Dataset, leaves=None):
    '''
    Per-leaf stored effect and test-sample effect at the leaf trigger.

    Parameters:
    -----------
    tree: TreeNode
    test: Dataset
    leaves: list of TreeNode, optional
        leaves to report (default every leaf)

    Returns:
    --------
    list of LeafEffect sorted by leaf id; a leaf whose test sample has an
    empty arm is marked skipped with tau_test = nan
    '''
    reached = route(tree, test)
    rows = []
    for leaf in _selected(tree, leaves):
        idx = reached[leaf.node_id]
        flags = treated_mask(test.treatment[idx], leaf.trigger)
        y = test.outcome[idx]
        if flags.all() or not flags.any():
            rows.append(LeafEffect(leaf.node_id, len(idx), leaf.ace, np.nan, leaf.p_value, skipped=True))
            continue
        tau_test = float(np.mean(y[flags]) - np.mean(y[~flags]))
        rows.append(LeafEffect(leaf.node_id, len(idx), leaf.ace, tau_test, leaf.p_value))
    return rows


def ace_error(tree: TreeNode, test: Dataset, leaves=None):
    '''
    Mean over evaluable leaves of |tau_hat - tau_test| / (|tau_hat| + |tau_test|),
    tau_hat being the stored training-time leaf effect and tau_test the
    test-sample effect at the same leaf and trigger.
    '''
    rows = leaf_effects(tree, test, leaves)
    evaluated = [row for row in rows if not row.skipped]
    skipped = len(rows) - len(evaluated)
    if skipped:
        logger.warning('Skipped {} of {} leaves with an empty test arm'.format(skipped, len(rows)))
    if not evaluated:
        raise EmptyData('trigtree.toolbox.evaluation: no leaf has both arms in the test data')
    return float(np.mean(_smape_terms([r.tau_hat for r in evaluated], [r.tau_test for r in evaluated])))


def unit_smape(predicted, truth):
    '''
    Mean over units of |tau - tau_hat| / (|tau| + |tau_hat|); 0/0 terms count as 0.
    '''
    predicted = np.asarray(predicted, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if len(predicted) != len(truth):
        raise InputValidationError('trigtree.toolbox.evaluation: {} predictions for {} true effects'.format(
            len(predicted), len(truth)))
    if len(truth) == 0:
        raise EmptyData('trigtree.toolbox.evaluation: no units to score')
    return float(np.mean(_smape_terms(truth, predicted)))


def leaf_variance(effects):
    '''
    Unbiased sample variance of leaf effects; 0 for fewer than 2 leaves.
    '''
    effects = np.asarray(effects, dtype=float).reshape(-1)
    if len(effects) < 2:
        return 0.0
    return float(np.var(effects, ddof=1))


def mahalanobis_balance(samples: Dataset, trigger=None):
    '''
    Average Mahalanobis distance of each unit to the mean of the opposite arm.

    The covariance is estimated on all units of the leaf (both arms pooled)
    and regularized as S + eps * I, eps = 1e-6 * trace(S) / d.

    Parameters:
    -----------
    samples: Dataset
        units of one leaf
    trigger: float, optional
        treated when t >= trigger (t != 0 without a trigger)
    '''
    X = np.asarray(samples.features, dtype=float)
    n, d = X.shape
    flags = treated_mask(samples.treatment, trigger)
    if flags.all() or not flags.any():
        raise DegenerateGroup('Mahalanobis balance needs both arms')
    if n < d + 1:
        raise DegenerateGroup('Mahalanobis balance needs at least d + 1 = {} units, got {}'.format(d + 1, n))

    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    eps = 1e-6 * np.trace(cov) / d
    try:
        if eps <= 0:
            raise np.linalg.LinAlgError('zero covariance')
        precision = np.linalg.inv(cov + eps * np.eye(d))
    except np.linalg.LinAlgError as e:
        raise DegenerateGroup('singular covariance in Mahalanobis balance ({})'.format(e))

    mean_treated = X[flags].mean(axis=0)
    mean_control = X[~flags].mean(axis=0)
    diff = np.where(flags[:, None], X - mean_control, X - mean_treated)
    distances = np.sqrt(np.maximum(np.einsum('ij,jk,ik->i', diff, precision, diff), 0.0))
    return float(np.mean(distances))


def tree_mahalanobis(tree: TreeNode, data: Dataset, leaves=None):
    '''
    Mean Mahalanobis balance over the leaves where it is defined (nan if none).
    '''
    reached = route(tree, data)
    values = []
    for leaf in _selected(tree, leaves):
        try:
            values.append(mahalanobis_balance(subset(data, reached[leaf.node_id]), leaf.trigger))
        except DegenerateGroup as e:
            logger.debug('Leaf {}: {}'.format(leaf.node_id, e))
    if not values:
        return np.nan
    return float(np.mean(values))


def evaluate_tree(tree: TreeNode, test: Dataset, leaves=None):
    '''
    Every metric of a tree on a test set; with leaves given (e.g. the
    significant leaves) only those leaves and the units they receive count.

    Returns:
    --------
    EffectReport; unit_smape is None when the test set carries no true effect
    '''
    selected = _selected(tree, leaves)
    rows = leaf_effects(tree, test, selected)
    error = ace_error(tree, test, selected)

    smape = None
    if test.has_true_effect:
        reached = route(tree, test)
        idx = np.concatenate([reached[leaf.node_id] for leaf in selected] or [np.zeros(0, dtype=int)])
        predicted = np.concatenate([np.full(len(reached[leaf.node_id]), leaf.ace) for leaf in selected]
                                   or [np.zeros(0)])
        if len(idx):
            smape = unit_smape(predicted, test.true_effect[idx])

    return EffectReport(
        ace_error=error,
        unit_smape=smape,
        leaf_variance=leaf_variance([leaf.ace for leaf in selected]),
        mahalanobis_balance=tree_mahalanobis(tree, test, selected),
        per_leaf=rows,
        n_leaves=len(selected),
        n_skipped=sum(1 for row in rows if row.skipped),
    )


def compare_methods(errors_by_method):
    '''
    Mean and standard deviation of each method's errors across runs, with
    pairwise significance by non-overlapping mean +- sd intervals.

    Parameters:
    -----------
    errors_by_method: dict of str -> list of float (nan entries ignored)

    Returns:
    --------
    pd.DataFrame indexed by method with columns mean, sd, n and one boolean
    column sig_vs_<method> per method
    '''
    stats = {}
    for method, errors in errors_by_method.items():
        errors = np.asarray(errors, dtype=float)
        errors = errors[np.isfinite(errors)]
        sd = float(np.std(errors, ddof=1)) if len(errors) > 1 else 0.0
        stats[method] = (float(np.mean(errors)) if len(errors) else np.nan, sd, len(errors))

    table = pd.DataFrame.from_dict(stats, orient='index', columns=['mean', 'sd', 'n'])
    for other, (mean_b, sd_b, _) in stats.items():
        table['sig_vs_{}'.format(other)] = [
            bool(np.isfinite(mean_a) and np.isfinite(mean_b) and sd_overlap_significant(mean_a, sd_a, mean_b, sd_b))
            for mean_a, sd_a, _ in stats.values()]
    return table
