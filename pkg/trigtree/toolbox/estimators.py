# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Scalar estimators and partition measures for trigger-based causal trees.

Every splitting criterion is built from the same pieces: per-arm outcome
means and variances, the average causal effect (ACE), the partition measure
F = N * tau^2, the validation cost term C, the combined measure F_C and the
honest variance penalty H. In trigger mode a continuous treatment t is
binarized as treated when t >= theta. Trigger candidates can require
a minimum share of the node's units in each arm.

Classes:
--------
GroupStats
CriterionKind
CriterionConfig
TriggerResult

Methods:
--------
group_stats
ace
partition_measure_f
cost_term
f_c
honest_penalty
criterion_score
arm_floor
find_trigger
trigger_candidates
node_measure
node_effect
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from trigtree.toolbox.errors import DegenerateGroup, InputValidationError

logger = logging.getLogger(__name__)

# Candidates whose score is within this relative distance of the best are tied
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class GroupStats:
    n_treated: int
    n_control: int
    mean_treated: float
    mean_control: float
    var_treated: float = np.nan
    var_control: float = np.nan

    @property
    def n(self):
        return self.n_treated + self.n_control

    @property
    def treated_share(self):
        return self.n_treated / self.n if self.n else np.nan


class CriterionKind(Enum):
    ADAPTIVE = 'ADAPTIVE'
    HONEST = 'HONEST'
    LEARN = 'LEARN'
    HONEST_LEARN = 'HONEST_LEARN'
    HONEST_VAL = 'HONEST_VAL'

    @classmethod
    def parse(cls, value):
        '''
        Accepts enum members, full names (any case) and the short method
        labels A, H, L, HL, HV (with or without a CT- prefix).
        '''
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace('-', '_')
        if key.startswith('CT_'):
            key = key[3:]
        short = {'A': 'ADAPTIVE', 'H': 'HONEST', 'L': 'LEARN', 'HL': 'HONEST_LEARN', 'HV': 'HONEST_VAL'}
        key = short.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise InputValidationError('trigtree.toolbox.estimators: unknown criterion kind "{}"'.format(value))

    @property
    def label(self):
        return {'ADAPTIVE': 'CT-A', 'HONEST': 'CT-H', 'LEARN': 'CT-L',
                'HONEST_LEARN': 'CT-HL', 'HONEST_VAL': 'CT-HV'}[self.value]

    @property
    def uses_cost(self):
        return self in (CriterionKind.LEARN, CriterionKind.HONEST_LEARN, CriterionKind.HONEST_VAL)

    @property
    def uses_penalty(self):
        return self in (CriterionKind.HONEST, CriterionKind.HONEST_LEARN, CriterionKind.HONEST_VAL)


@dataclass(frozen=True)
class CriterionConfig:
    """
    Parameters:
    -----------
    kind: CriterionKind
    lam: float
        lambda in [0, 1], weight of the cost term (LEARN, HONEST_LEARN, HONEST_VAL)
    trigger_mode: bool
        search a treatment trigger per node; otherwise treated means t != 0
    max_trigger_candidates: int, optional
        thin the trigger candidates to this many quantiles of the node treatment
    honest_share: str
        'node' (treated share inside the node) or 'global' (train share of the split)
        for p in the honest penalty
    cost_divisor: str
        sizes in the F_C denominator |N_train - N_val| + 1: 'split' uses the whole
        training and validation parts, 'node' the counts inside the node
    """
    kind: CriterionKind = CriterionKind.LEARN
    lam: float = 0.5
    trigger_mode: bool = True
    max_trigger_candidates: Optional[int] = None
    honest_share: str = 'node'
    cost_divisor: str = 'split'

    def __post_init__(self):
        object.__setattr__(self, 'kind', CriterionKind.parse(self.kind))
        if not (0.0 <= self.lam <= 1.0):
            raise InputValidationError('trigtree.toolbox.estimators: lambda must be in [0, 1], got {}'.format(self.lam))
        if self.max_trigger_candidates is not None and int(self.max_trigger_candidates) < 1:
            raise InputValidationError('trigtree.toolbox.estimators: max_trigger_candidates must be positive')
        if self.honest_share not in ('node', 'global'):
            raise InputValidationError(
                'trigtree.toolbox.estimators: honest_share must be "node" or "global", got "{}"'.format(self.honest_share))
        if self.cost_divisor not in ('split', 'node'):
            raise InputValidationError(
                'trigtree.toolbox.estimators: unknown cost_divisor "{}" (split or node)'.format(self.cost_divisor))

    def heldout_part(self, data):
        '''
        Name of the DataSplit part the honest penalty is computed on, or None.
        HONEST_VAL uses validation; HONEST and HONEST_LEARN use estimation,
        falling back to validation when no estimation part exists.
        '''
        if not self.kind.uses_penalty:
            return None
        if self.kind is CriterionKind.HONEST_VAL:
            return 'validation'
        if data.estimation is not None and len(data.estimation) > 0:
            return 'estimation'
        return 'validation'

    def to_dict(self):
        return {'kind': self.kind.value,
                'lambda': float(self.lam),
                'trigger_mode': bool(self.trigger_mode),
                'max_trigger_candidates': None if self.max_trigger_candidates is None else int(self.max_trigger_candidates),
                'honest_share': self.honest_share,
                'cost_divisor': self.cost_divisor}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d.get('kind', 'LEARN'),
                   lam=float(d.get('lambda', 0.5)),
                   trigger_mode=bool(d.get('trigger_mode', True)),
                   max_trigger_candidates=d.get('max_trigger_candidates'),
                   honest_share=d.get('honest_share', 'node'),
                   cost_divisor=d.get('cost_divisor', 'split'))


@dataclass(frozen=True)
class TriggerResult:
    trigger: Optional[float]
    score: float
    ace: float
    stats: GroupStats


# ---------------------------------------------------------------------------
# Scalar estimators
# ---------------------------------------------------------------------------

def treated_mask(treatment, trigger=None):
    '''
    Treated flags: t >= trigger in trigger mode, t != 0 otherwise.
    '''
    treatment = np.asarray(treatment, dtype=float)
    if trigger is None:
        return treatment != 0
    return treatment >= trigger


def group_stats(samples, trigger=None, binary_treated_flags=None):
    '''
    Per-arm outcome counts, means and unbiased variances of a Dataset.

    Parameters:
    -----------
    samples: Dataset
    trigger: float, optional
        binarize treatment as t >= trigger
    binary_treated_flags: array-like of bool, optional
        explicit treated flags (ignored when trigger is given)

    Returns:
    --------
    GroupStats; variances are nan for an arm with fewer than 2 units
    '''
    return _group_stats(samples.outcome, samples.treatment, trigger, binary_treated_flags)


def _group_stats(outcome, treatment, trigger=None, flags=None):
    outcome = np.asarray(outcome, dtype=float)
    if trigger is not None:
        flags = treated_mask(treatment, trigger)
    elif flags is None:
        flags = treated_mask(treatment)
    flags = np.asarray(flags, dtype=bool)
    if len(flags) != len(outcome):
        raise InputValidationError('trigtree.toolbox.estimators: treated flags and outcomes differ in length')

    y1 = outcome[flags]
    y0 = outcome[~flags]
    if len(y1) == 0 or len(y0) == 0:
        raise DegenerateGroup('empty {} group (n_treated={}, n_control={})'.format(
            'treated' if len(y1) == 0 else 'control', len(y1), len(y0)))
    return GroupStats(
        n_treated=len(y1),
        n_control=len(y0),
        mean_treated=float(np.mean(y1)),
        mean_control=float(np.mean(y0)),
        var_treated=float(np.var(y1, ddof=1)) if len(y1) > 1 else np.nan,
        var_control=float(np.var(y0, ddof=1)) if len(y0) > 1 else np.nan,
    )


def ace(stats: GroupStats):
    if stats.n_treated == 0 or stats.n_control == 0:
        raise DegenerateGroup('ACE undefined with an empty group')
    return stats.mean_treated - stats.mean_control


def partition_measure_f(n, tau_hat):
    '''
    F(S) = N * tau^2
    '''
    return n * tau_hat**2


def cost_term(n_val, tau_val, tau_train):
    '''
    C = N_val * |tau(val) - tau(train)|; zero for an empty validation subsample.
    '''
    if n_val == 0:
        return 0.0
    return n_val * np.abs(tau_val - tau_train)


def f_c(f_train, cost, n_train, n_val, lam):
    '''
    F_C = [(1 - lambda) F - lambda C] / (|N_train - N_val| + 1)
    '''
    if not (0.0 <= lam <= 1.0):
        raise InputValidationError('trigtree.toolbox.estimators: lambda must be in [0, 1], got {}'.format(lam))
    return ((1.0 - lam) * f_train - lam * cost) / (abs(n_train - n_val) + 1)


def _penalty(var_treated, var_control, p, n_est, n):
    return (1.0 + n_est / n) * (var_treated / p + var_control / (1.0 - p))


def honest_penalty(stats: GroupStats, n_est, n, share=None):
    '''
    Honest variance penalty H = (1 + N_est / N) * (V1 / p + V0 / (1 - p)).

    Parameters:
    -----------
    stats: GroupStats
        arm statistics of the held-out (estimation) subsample
    n_est: int
        size of the held-out subsample
    n: int
        node size N
    share: float, optional
        p; defaults to the treated share of stats
    '''
    p = stats.treated_share if share is None else share
    if not (0.0 < p < 1.0):
        raise DegenerateGroup('honest penalty needs 0 < p < 1, got p={}'.format(p))
    if np.isnan(stats.var_treated) or np.isnan(stats.var_control):
        raise DegenerateGroup('honest penalty needs at least 2 units per arm')
    if n <= 0:
        raise DegenerateGroup('honest penalty needs a nonempty node')
    return _penalty(stats.var_treated, stats.var_control, p, n_est, n)


# ---------------------------------------------------------------------------
# Vectorised scoring over trigger candidates
# ---------------------------------------------------------------------------

class _ArmSums():
    '''
    Arm counts, centred outcome sums and sums of squares for a batch of
    candidate binarizations of one subsample.
    '''

    def __init__(self, n1, n0, s1, s0, q1, q0):
        self.n1, self.n0 = n1, n0
        self.s1, self.s0 = s1, s0
        self.q1, self.q0 = q1, q0

    @classmethod
    def from_thresholds(cls, treatment, outcome, thetas):
        thetas = np.asarray(thetas, dtype=float)
        n = len(outcome)
        if n == 0:
            zeros = np.zeros(len(thetas))
            return cls(zeros.astype(np.int64), zeros.astype(np.int64), zeros, zeros, zeros, zeros)
        order = np.argsort(treatment, kind='stable')
        t_sorted = treatment[order]
        y = outcome[order] - np.mean(outcome)
        s = np.concatenate(([0.0], np.cumsum(y)))
        q = np.concatenate(([0.0], np.cumsum(y * y)))
        c0 = np.searchsorted(t_sorted, thetas, side='left')
        return cls(n - c0, c0, s[n] - s[c0], s[c0], q[n] - q[c0], q[c0])

    @classmethod
    def from_flags(cls, outcome, flags):
        flags = np.asarray(flags, dtype=bool)
        if len(outcome) == 0:
            zero = np.zeros(1)
            return cls(zero.astype(np.int64), zero.astype(np.int64), zero, zero, zero, zero)
        y = outcome - np.mean(outcome)
        y1, y0 = y[flags], y[~flags]
        return cls(np.array([len(y1)]), np.array([len(y0)]),
                   np.array([np.sum(y1)]), np.array([np.sum(y0)]),
                   np.array([np.sum(y1 * y1)]), np.array([np.sum(y0 * y0)]))

    def tau(self):
        with np.errstate(divide='ignore', invalid='ignore'):
            return self.s1 / self.n1 - self.s0 / self.n0

    def variances(self):
        with np.errstate(divide='ignore', invalid='ignore'):
            v1 = np.maximum((self.q1 - self.s1**2 / self.n1) / (self.n1 - 1), 0.0)
            v0 = np.maximum((self.q0 - self.s0**2 / self.n0) / (self.n0 - 1), 0.0)
        return v1, v0

    def both_arms(self, minimum):
        return (self.n1 >= minimum) & (self.n0 >= minimum)


class _NodeView():
    '''
    Treatment/outcome arrays of one node for the subsamples a criterion needs.
    '''

    def __init__(self, node, data, config: CriterionConfig):
        self.t_tr = data.train.treatment[node.train_idx]
        self.y_tr = data.train.outcome[node.train_idx]
        self.t_val = data.validation.treatment[node.val_idx]
        self.y_val = data.validation.outcome[node.val_idx]

        held = config.heldout_part(data)
        if held == 'estimation':
            self.t_held = data.estimation.treatment[node.est_idx]
            self.y_held = data.estimation.outcome[node.est_idx]
            n_held_global = len(data.estimation)
        elif held == 'validation':
            self.t_held, self.y_held = self.t_val, self.y_val
            n_held_global = len(data.validation)
        else:
            self.t_held = self.y_held = np.zeros(0)
            n_held_global = 0

        self.global_share = len(data.train) / (len(data.train) + n_held_global) if held else np.nan
        if config.cost_divisor == 'split':
            self.divisor_sizes = (len(data.train), len(data.validation))
        else:
            self.divisor_sizes = (len(self.y_tr), len(self.y_val))

    def arms(self, thetas=None):
        '''
        _ArmSums of (train, validation, held-out) under each theta, or under
        the binary t != 0 flags when thetas is None.
        '''
        if thetas is None:
            return tuple(_ArmSums.from_flags(y, treated_mask(t))
                         for t, y in ((self.t_tr, self.y_tr), (self.t_val, self.y_val), (self.t_held, self.y_held)))
        return tuple(_ArmSums.from_thresholds(t, y, thetas)
                     for t, y in ((self.t_tr, self.y_tr), (self.t_val, self.y_val), (self.t_held, self.y_held)))


def arm_floor(n, share, minimum):
    '''
    Units required in each arm of a subsample of n units: at least minimum
    and at least share * n.
    '''
    return max(int(minimum), int(np.ceil(share * n - 1e-9)))


def _score(view: _NodeView, arms, config: CriterionConfig, min_group_size=1, min_heldout_size=0, min_arm_share=0.0):
    '''
    Criterion value for every candidate binarization; -inf marks an invalid
    candidate. Returns (scores, training ACEs).
    '''
    tr, val, held = arms
    n_tr, n_val, n_held = len(view.y_tr), len(view.y_val), len(view.y_held)

    tau_tr = tr.tau()
    if n_tr == 0:
        return np.full(len(tau_tr), -np.inf), tau_tr
    valid = tr.both_arms(arm_floor(n_tr, min_arm_share, max(int(min_group_size), 1)))
    with np.errstate(invalid='ignore'):
        score = partition_measure_f(n_tr, tau_tr)

        if config.kind.uses_cost:
            tau_val = val.tau()
            valid &= val.both_arms(arm_floor(n_val, min_arm_share, min_heldout_size))
            cost = np.where(val.both_arms(1), cost_term(n_val, tau_val, tau_tr), 0.0)
            score = f_c(score, cost, view.divisor_sizes[0], view.divisor_sizes[1], config.lam)

        if config.kind.uses_penalty:
            v1, v0 = held.variances()
            if config.honest_share == 'global':
                p = np.full(len(score), view.global_share)
            else:
                with np.errstate(divide='ignore'):
                    p = held.n1 / (held.n1 + held.n0)
            valid &= held.both_arms(max(2, arm_floor(n_held, min_arm_share, min_heldout_size))) & (p > 0.0) & (p < 1.0)
            with np.errstate(divide='ignore'):
                penalty = _penalty(v1, v0, p, n_held, n_tr + n_held)
            score = score - penalty

    return np.where(valid & np.isfinite(score), score, -np.inf), tau_tr


def _argmax_first(scores):
    '''
    Index of the best score; among candidates tied within TIE_RTOL the first wins.
    '''
    best = np.max(scores)
    tied = np.flatnonzero(scores >= best - TIE_RTOL * abs(best))
    return int(tied[0])


def trigger_candidates(treatment, max_candidates=None):
    '''
    Candidate triggers: the distinct treatment values, ascending, optionally
    thinned to max_candidates empirical quantiles (observed values only).
    '''
    treatment = np.asarray(treatment, dtype=float)
    distinct = np.unique(treatment)
    if max_candidates is None or max_candidates >= len(distinct):
        return distinct
    probs = (np.arange(max_candidates) + 0.5) / max_candidates
    return np.unique(np.quantile(treatment, probs, method='inverted_cdf'))


def find_trigger(node, data, config: CriterionConfig, min_group_size=1, min_heldout_size=0, min_arm_share=0.0):
    '''
    Exhaustive trigger search at a node.

    Parameters:
    -----------
    node: NodeSample
    data: DataSplit
    config: CriterionConfig
    min_group_size: int
        per-arm minimum on the node's training subsample
    min_heldout_size: int
        per-arm minimum on the validation/estimation subsamples the criterion uses
    min_arm_share: float
        each arm of every subsample also needs this share of the subsample's units

    Returns:
    --------
    TriggerResult for the best candidate; ties go to the smallest trigger
    '''
    view = _NodeView(node, data, config)
    distinct = np.unique(view.t_tr)
    if len(distinct) < 2:
        raise DegenerateGroup('trigger search needs at least 2 distinct treatment values, got {}'.format(len(distinct)))

    thetas = trigger_candidates(view.t_tr, config.max_trigger_candidates)
    scores, taus = _score(view, view.arms(thetas), config, min_group_size, min_heldout_size, min_arm_share)
    if not np.any(np.isfinite(scores)):
        raise DegenerateGroup('no valid trigger among {} candidates'.format(len(thetas)))

    i = _argmax_first(scores)
    theta = float(thetas[i])
    return TriggerResult(
        trigger=theta,
        score=float(scores[i]),
        ace=float(taus[i]),
        stats=_group_stats(view.y_tr, view.t_tr, trigger=theta),
    )


def criterion_score(node, data, config: CriterionConfig, trigger=None, min_group_size=1, min_heldout_size=0,
                    min_arm_share=0.0):
    '''
    Value of the configured partition measure at a node.

    In trigger mode treatment is binarized by trigger on every subsample
    (the best trigger is searched when none is given); in binary mode the
    treated flag is t != 0.

    Raises DegenerateGroup when a subsample the criterion needs has an empty
    (or, for the honest penalty, a single-unit) arm.
    '''
    if config.trigger_mode and trigger is None:
        return find_trigger(node, data, config, min_group_size, min_heldout_size, min_arm_share).score

    view = _NodeView(node, data, config)
    thetas = None if not config.trigger_mode else np.array([float(trigger)])
    share = min_arm_share if config.trigger_mode else 0.0
    scores, _ = _score(view, view.arms(thetas), config, min_group_size, min_heldout_size, share)
    if not np.isfinite(scores[0]):
        raise DegenerateGroup('{} criterion undefined at this node (trigger={})'.format(config.kind.label, trigger))
    return float(scores[0])


def node_measure(node, data, config: CriterionConfig, min_group_size=1, min_heldout_size=0, min_arm_share=0.0):
    '''
    Best score of a node under its own binarization: find_trigger in trigger
    mode, the t != 0 flags otherwise (min_arm_share only constrains triggers).
    Raises DegenerateGroup when invalid.
    '''
    if config.trigger_mode:
        return find_trigger(node, data, config, min_group_size, min_heldout_size, min_arm_share)

    view = _NodeView(node, data, config)
    scores, taus = _score(view, view.arms(None), config, min_group_size, min_heldout_size)
    if not np.isfinite(scores[0]):
        raise DegenerateGroup('{} criterion undefined at this node'.format(config.kind.label))
    return TriggerResult(trigger=None, score=float(scores[0]), ace=float(taus[0]),
                         stats=_group_stats(view.y_tr, view.t_tr))


def node_effect(node, data, config: CriterionConfig, trigger=None, fallback=None):
    '''
    Reported ACE of a node at its (training-chosen) trigger.

    HONEST and HONEST_LEARN re-estimate on the held-out estimation subsample;
    when it has an empty arm at the node the training estimate (fallback, or
    recomputed) is kept.
    '''
    if config.kind in (CriterionKind.HONEST, CriterionKind.HONEST_LEARN):
        part = config.heldout_part(data)
        dataset = data.estimation if part == 'estimation' else data.validation
        idx = node.est_idx if part == 'estimation' else node.val_idx
        try:
            return ace(_group_stats(dataset.outcome[idx], dataset.treatment[idx], trigger=trigger))
        except DegenerateGroup:
            logger.debug('Held-out subsample degenerate at node, keeping the training estimate')

    if fallback is not None:
        return float(fallback)
    return ace(_group_stats(data.train.outcome[node.train_idx], data.train.treatment[node.train_idx], trigger=trigger))
