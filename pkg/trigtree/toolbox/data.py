# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Data model for trigger-based causal trees: units, datasets, the
train/validation/estimation/test partition and the per-node index
carriers every splitting criterion consumes.

Classes:
--------
Sample
Dataset
DataSplit
NodeSample

Functions:
----------
substream
split_dataset
subset
kfold_indices
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from trigtree.toolbox.errors import EmptyData, InputValidationError

logger = logging.getLogger(__name__)

CONTINUOUS = 'continuous'
DISCRETE = 'discrete'
FEATURE_KINDS = (CONTINUOUS, DISCRETE)


def substream(seed, name):
    '''
    Named random substream derived from a single seed, e.g. substream(seed, 'split').

    Streams with different names are independent of each other and of the
    order in which they are requested.
    '''
    if int(seed) < 0:
        raise InputValidationError('trigtree.toolbox.data: seed must be nonnegative, got {}'.format(seed))
    key = zlib.crc32(name.encode('utf-8'))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))


@dataclass(frozen=True)
class Sample:
    features: tuple
    treatment: float
    outcome: float
    true_effect: Optional[float] = None


class Dataset():
    """
    Immutable column store of units: features (N x d), treatment amount,
    observed outcome and, for synthetic data, the ground-truth effect.

    Parameters:
    -----------
    features: array-like, shape (N, d)
    treatment: array-like, shape (N,)
    outcome: array-like, shape (N,)
    true_effect: array-like, shape (N,), optional
    feature_names: list of str, optional
    feature_kinds: list of 'continuous' | 'discrete', optional
    """

    def __init__(self, features, treatment, outcome, true_effect=None, feature_names=None, feature_kinds=None):
        features = np.array(features, dtype=float)
        treatment = np.array(treatment, dtype=float).reshape(-1)
        outcome = np.array(outcome, dtype=float).reshape(-1)

        if features.ndim != 2:
            raise InputValidationError('trigtree.toolbox.data: features must be two-dimensional (N x d)')
        n, d = features.shape
        if d < 1:
            raise InputValidationError('trigtree.toolbox.data: dataset dimension must be positive')
        if len(treatment) != n or len(outcome) != n:
            raise InputValidationError(
                'trigtree.toolbox.data: features, treatment and outcome have different lengths ({}, {}, {})'.format(
                    n, len(treatment), len(outcome)))

        # Missing values are rejected, never imputed
        if not np.all(np.isfinite(features)):
            row, col = np.argwhere(~np.isfinite(features))[0]
            raise InputValidationError(
                'trigtree.toolbox.data: non-finite feature value at row {}, feature {}'.format(row, col))
        if not np.all(np.isfinite(treatment)):
            raise InputValidationError('trigtree.toolbox.data: non-finite treatment at row {}'.format(
                int(np.flatnonzero(~np.isfinite(treatment))[0])))
        if not np.all(np.isfinite(outcome)):
            raise InputValidationError('trigtree.toolbox.data: non-finite outcome at row {}'.format(
                int(np.flatnonzero(~np.isfinite(outcome))[0])))

        if true_effect is not None:
            true_effect = np.array(true_effect, dtype=float).reshape(-1)
            if len(true_effect) != n:
                raise InputValidationError('trigtree.toolbox.data: true_effect length does not match the data')

        if feature_names is None:
            feature_names = ['x{}'.format(j) for j in range(d)]
        if feature_kinds is None:
            feature_kinds = [CONTINUOUS] * d
        feature_names = [str(name) for name in feature_names]
        feature_kinds = [str(kind) for kind in feature_kinds]
        if len(feature_names) != d or len(feature_kinds) != d:
            raise InputValidationError(
                'trigtree.toolbox.data: expected {} feature names and kinds, got {} and {}'.format(
                    d, len(feature_names), len(feature_kinds)))
        for kind in feature_kinds:
            if kind not in FEATURE_KINDS:
                raise InputValidationError('trigtree.toolbox.data: unknown feature kind "{}"'.format(kind))

        for arr in (features, treatment, outcome, true_effect):
            if arr is not None:
                arr.setflags(write=False)

        self.features = features
        self.treatment = treatment
        self.outcome = outcome
        self.true_effect = true_effect
        self.feature_names = feature_names
        self.feature_kinds = feature_kinds

    def __len__(self):
        return self.features.shape[0]

    def __getitem__(self, i):
        return Sample(
            features=tuple(float(v) for v in self.features[i]),
            treatment=float(self.treatment[i]),
            outcome=float(self.outcome[i]),
            true_effect=None if self.true_effect is None else float(self.true_effect[i]),
        )

    def __repr__(self):
        return 'Dataset(N={}, d={})'.format(len(self), self.dimension)

    @property
    def dimension(self):
        return self.features.shape[1]

    @property
    def samples(self):
        return [self[i] for i in range(len(self))]

    @property
    def has_true_effect(self):
        return self.true_effect is not None

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], dimension=None, feature_names=None, feature_kinds=None):
        samples = list(samples)
        if dimension is None:
            if not samples:
                raise EmptyData('trigtree.toolbox.data: dimension is required for an empty sample list')
            dimension = len(samples[0].features)
        for i, s in enumerate(samples):
            if len(s.features) != dimension:
                raise InputValidationError(
                    'trigtree.toolbox.data: sample {} has {} features, expected {}'.format(i, len(s.features), dimension))
        true_effect = None
        if samples and all(s.true_effect is not None for s in samples):
            true_effect = [s.true_effect for s in samples]
        return cls(
            features=np.array([s.features for s in samples], dtype=float).reshape(len(samples), dimension),
            treatment=[s.treatment for s in samples],
            outcome=[s.outcome for s in samples],
            true_effect=true_effect,
            feature_names=feature_names,
            feature_kinds=feature_kinds,
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, feature_columns, treatment_column, outcome_column,
                   true_effect_column=None, discrete_columns=()):
        true_effect = None
        if true_effect_column is not None:
            true_effect = frame[true_effect_column].to_numpy(dtype=float)
        return cls(
            features=frame[list(feature_columns)].to_numpy(dtype=float),
            treatment=frame[treatment_column].to_numpy(dtype=float),
            outcome=frame[outcome_column].to_numpy(dtype=float),
            true_effect=true_effect,
            feature_names=list(feature_columns),
            feature_kinds=[DISCRETE if c in discrete_columns else CONTINUOUS for c in feature_columns],
        )

    def to_frame(self, treatment_column='treatment', outcome_column='outcome', true_effect_column='true_effect'):
        frame = pd.DataFrame(np.array(self.features), columns=self.feature_names)
        frame[treatment_column] = np.array(self.treatment)
        frame[outcome_column] = np.array(self.outcome)
        if self.true_effect is not None:
            frame[true_effect_column] = np.array(self.true_effect)
        return frame


def subset(data: Dataset, indices):
    '''
    Rows of data at indices, in the order given.

    Parameters:
    -----------
    data: Dataset
    indices: list-like of int
        no duplicates, each in [0, len(data))
    '''
    indices = np.asarray(indices, dtype=np.int64).reshape(-1)
    if len(indices) and (indices.min() < 0 or indices.max() >= len(data)):
        bad = indices[(indices < 0) | (indices >= len(data))][0]
        raise IndexError('trigtree.toolbox.data: index {} out of range for {} samples'.format(int(bad), len(data)))
    if len(np.unique(indices)) != len(indices):
        raise ValueError('trigtree.toolbox.data: duplicate indices in subset')
    return Dataset(
        features=data.features[indices].reshape(len(indices), data.dimension),
        treatment=data.treatment[indices],
        outcome=data.outcome[indices],
        true_effect=None if data.true_effect is None else data.true_effect[indices],
        feature_names=data.feature_names,
        feature_kinds=data.feature_kinds,
    )


@dataclass(eq=False)
class DataSplit:
    """
    Disjoint train / validation / estimation / test parts of one source dataset.

    Sample identity is the positional index in the source; the *_idx arrays
    hold those positions, ascending.
    """
    train: Dataset
    validation: Dataset
    estimation: Optional[Dataset]
    test: Optional[Dataset]
    seed: int
    validation_fraction: float
    estimation_fraction: float = 0.0
    test_fraction: float = 0.0
    train_idx: Optional[np.ndarray] = None
    val_idx: Optional[np.ndarray] = None
    est_idx: Optional[np.ndarray] = None
    test_idx: Optional[np.ndarray] = None

    @property
    def dimension(self):
        return self.train.dimension

    @property
    def source_size(self):
        sizes = [len(self.train), len(self.validation)]
        sizes += [len(part) for part in (self.estimation, self.test) if part is not None]
        return int(sum(sizes))


def _part_size(fraction, n):
    # guard against 0.29 * 100 = 28.999999999999996
    return int(np.floor(fraction * n + 1e-9))


def split_dataset(data: Dataset, validation_fraction=0.5, estimation_fraction=0.0, test_fraction=0.0, seed=0):
    '''
    Uniform random partition of data into train / validation / estimation / test.

    Part sizes are floor(fraction * N); the remainder goes to train.

    Parameters:
    -----------
    data: Dataset
    validation_fraction: float
        rho, share of the source used for validation
    estimation_fraction: float
        share carved out for honest estimation
    test_fraction: float
        share held out for evaluation
    seed: int
        drives the 'split' substream
    '''
    n = len(data)
    if n == 0:
        raise EmptyData('trigtree.toolbox.data: cannot split an empty dataset')
    fractions = {'validation_fraction': validation_fraction,
                 'estimation_fraction': estimation_fraction,
                 'test_fraction': test_fraction}
    for name, value in fractions.items():
        if not (0.0 <= value < 1.0):
            raise InputValidationError('trigtree.toolbox.data: {} must be in [0, 1), got {}'.format(name, value))
    if sum(fractions.values()) >= 1.0:
        raise InputValidationError('trigtree.toolbox.data: validation, estimation and test fractions must sum below 1')

    n_test = _part_size(test_fraction, n)
    n_val = _part_size(validation_fraction, n)
    n_est = _part_size(estimation_fraction, n)

    perm = substream(seed, 'split').permutation(n)
    test_idx = np.sort(perm[:n_test])
    val_idx = np.sort(perm[n_test:n_test + n_val])
    est_idx = np.sort(perm[n_test + n_val:n_test + n_val + n_est])
    train_idx = np.sort(perm[n_test + n_val + n_est:])

    logger.debug('Split %d samples into train=%d, validation=%d, estimation=%d, test=%d (seed %d)',
                 n, len(train_idx), len(val_idx), len(est_idx), len(test_idx), seed)

    return DataSplit(
        train=subset(data, train_idx),
        validation=subset(data, val_idx),
        estimation=subset(data, est_idx) if n_est > 0 else None,
        test=subset(data, test_idx) if n_test > 0 else None,
        seed=int(seed),
        validation_fraction=float(validation_fraction),
        estimation_fraction=float(estimation_fraction),
        test_fraction=float(test_fraction),
        train_idx=train_idx,
        val_idx=val_idx,
        est_idx=est_idx,
        test_idx=test_idx,
    )


def kfold_indices(n, k, seed):
    '''
    Random partition of range(n) into k folds (ascending within a fold).
    '''
    if k < 2 or k > n:
        raise InputValidationError('trigtree.toolbox.data: need 2 <= folds <= N, got folds={} for N={}'.format(k, n))
    perm = substream(seed, 'folds').permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


_EMPTY = np.zeros(0, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class NodeSample:
    """
    A node's share of the data: positions into the train, validation and
    estimation parts of a DataSplit.
    """
    train_idx: np.ndarray
    val_idx: np.ndarray = _EMPTY
    est_idx: np.ndarray = _EMPTY

    @classmethod
    def root(cls, data: DataSplit):
        n_est = 0 if data.estimation is None else len(data.estimation)
        return cls(
            train_idx=np.arange(len(data.train), dtype=np.int64),
            val_idx=np.arange(len(data.validation), dtype=np.int64),
            est_idx=np.arange(n_est, dtype=np.int64),
        )

    @property
    def sizes(self):
        return len(self.train_idx), len(self.val_idx), len(self.est_idx)

    def split(self, rule, data: DataSplit):
        '''
        Route every index list through rule (anything with .feature and .threshold):
        x[feature] <= threshold goes left, the rest right.
        '''
        return self.partition(rule.feature, rule.threshold, data)

    def partition(self, feature, threshold, data: DataSplit):
        parts = [(self.train_idx, data.train), (self.val_idx, data.validation), (self.est_idx, data.estimation)]
        left, right = [], []
        for idx, part in parts:
            if part is None or len(idx) == 0:
                left.append(_EMPTY)
                right.append(_EMPTY)
                continue
            goes_left = part.features[idx, feature] <= threshold
            left.append(idx[goes_left])
            right.append(idx[~goes_left])
        return NodeSample(*left), NodeSample(*right)
