# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Run configuration to toolbox objects, and cross-validated tuning of the
cost weight lambda and the validation fraction rho.

Classes:
--------
TuneResult
TuneBatch

Methods:
--------
config_to_objs
load_run_data
cross_validate
tune
evaluate
"""
import itertools
import logging
import multiprocessing as mp
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from trigtree.toolbox.data import kfold_indices, split_dataset, subset
from trigtree.toolbox.errors import DegenerateGroup, EmptyData, InputValidationError, NoVariation
from trigtree.toolbox.estimators import CriterionConfig
from trigtree.toolbox.evaluation import ace_error
from trigtree.toolbox.learner import LearnerConfig, train
from trigtree.toolbox.synthetic import PlantedModel, default_model, generate
from trigtree.toolbox.utilities import load_csv

logger = logging.getLogger(__name__)


def config_to_objs(config):
    '''
    Criterion and learner configuration from a validated run configuration.

    Returns:
    --------
    LearnerConfig
    '''
    criterion = CriterionConfig(
        kind=config['criterion'],
        lam=config['lambda'],
        trigger_mode=config['trigger_mode'],
        max_trigger_candidates=config['max_trigger_candidates'],
        honest_share=config['honest_share'],
        cost_divisor=config['cost_divisor'],
    )
    return LearnerConfig(
        criterion=criterion,
        min_group_size=config['min_group_size'],
        max_depth=config['max_depth'],
        min_split_gain=config['min_split_gain'],
        min_heldout_size=config['min_heldout_size'],
        min_arm_share=config['min_arm_share'],
    )


def load_run_data(config, data_path=None):
    '''
    Dataset of a run: the CSV at data_path (or config['data_path']), else
    n_samples units drawn from the configured (or default) synthetic model.
    '''
    data_path = data_path or config.get('data_path')
    if data_path:
        return load_csv(data_path,
                        feature_columns=config['feature_columns'],
                        treatment_column=config['treatment_column'],
                        outcome_column=config['outcome_column'],
                        true_effect_column=config['true_effect_column'],
                        discrete_columns=config['discrete_columns'])
    if config.get('synthetic_model'):
        model = PlantedModel.from_dict(config['synthetic_model'], seed=config['seed'])
    else:
        model = default_model(seed=config['seed'])
    return generate(model, config['n_samples'])


def cross_validate(data, learner_config: LearnerConfig, rho, folds=5, seed=0, estimation_fraction=0.0):
    '''
    Mean held-out ace_error over k folds: each fold is the test set, the
    remaining units are split into train/validation(/estimation) by rho.

    Returns:
    --------
    float, nan when no fold could be scored
    '''
    errors = []
    for k, test_idx in enumerate(kfold_indices(len(data), folds, seed)):
        rest = np.setdiff1d(np.arange(len(data)), test_idx)
        try:
            split = split_dataset(subset(data, rest), validation_fraction=rho,
                                  estimation_fraction=estimation_fraction, seed=seed)
            tree = train(split, learner_config)
            errors.append(ace_error(tree, subset(data, test_idx)))
        except (EmptyData, NoVariation, DegenerateGroup) as e:
            logger.debug('Fold {} (rho={}, lambda={}) not scored: {}'.format(k, rho, learner_config.criterion.lam, e))
            errors.append(np.nan)
    errors = np.asarray(errors)
    if not np.any(np.isfinite(errors)):
        return np.nan
    return float(np.nanmean(errors))


def evaluate(indict):
    # One grid cell, as a function outside TuneBatch for pickle-ability
    learner_config = replace(indict['learner_config'],
                             criterion=replace(indict['learner_config'].criterion, lam=indict['lambda']))
    score = cross_validate(indict['data'], learner_config, indict['rho'], indict['folds'], indict['seed'],
                           indict['estimation_fraction'])
    logger.info('lambda = {:<6g} rho = {:<6g} ace_error = {:.6g}'.format(indict['lambda'], indict['rho'], score))
    return score


@dataclass
class TuneResult:
    best_lambda: float
    best_rho: float
    best_score: float
    table: pd.DataFrame


class TuneBatch():
    '''
    Grid of (lambda, rho) cells scored by k-fold cross-validation.
    '''

    def __init__(self, data, learner_config: LearnerConfig, lambda_grid, rho_grid, folds=5, seed=0,
                 estimation_fraction=0.0):
        if len(lambda_grid) == 0 or len(rho_grid) == 0:
            raise InputValidationError('trigtree.toolbox.tune: lambda and rho grids must be nonempty')
        for lam in lambda_grid:
            if not 0.0 <= lam <= 1.0:
                raise InputValidationError('trigtree.toolbox.tune: lambda {} outside [0, 1]'.format(lam))
        for rho in rho_grid:
            if not 0.0 < rho < 1.0:
                raise InputValidationError('trigtree.toolbox.tune: rho {} outside (0, 1)'.format(rho))
            if rho + estimation_fraction >= 1.0:
                raise InputValidationError('trigtree.toolbox.tune: rho {} leaves no training data'.format(rho))

        self.data = data
        self.learner_config = learner_config
        self.case_list = list(itertools.product([float(v) for v in lambda_grid], [float(v) for v in rho_grid]))
        self.folds = folds
        self.seed = seed
        self.estimation_fraction = estimation_fraction

    def create_case_data(self):
        return [{'data': self.data,
                 'learner_config': self.learner_config,
                 'lambda': lam,
                 'rho': rho,
                 'folds': self.folds,
                 'seed': self.seed,
                 'estimation_fraction': self.estimation_fraction} for lam, rho in self.case_list]

    def run_serial(self):
        return [evaluate(c) for c in self.create_case_data()]

    def run_multi(self, cores=None):
        # Run cells in parallel with the multiprocessing module
        if not cores:
            cores = mp.cpu_count()
        with mp.Pool(min(cores, len(self.case_list))) as pool:
            output = pool.map(evaluate, self.create_case_data())
        return output

    def run(self, cores=1):
        scores = self.run_serial() if cores <= 1 else self.run_multi(cores)
        table = pd.DataFrame({'lambda': [lam for lam, _ in self.case_list],
                              'rho': [rho for _, rho in self.case_list],
                              'ace_error': scores})

        # unscored cells rank last; ties go to the smaller lambda, then the smaller rho
        ranking = table.assign(key=table['ace_error'].fillna(np.inf)).sort_values(
            ['key', 'lambda', 'rho'], kind='mergesort')
        best = ranking.iloc[0]
        return TuneResult(best_lambda=float(best['lambda']), best_rho=float(best['rho']),
                          best_score=float(best['ace_error']), table=table)


def tune(data, learner_config: LearnerConfig, lambda_grid, rho_grid, folds=5, seed=0, estimation_fraction=0.0,
         cores=1):
    '''
    Cross-validated grid search over lambda and rho.

    Parameters:
    -----------
    data: Dataset
    learner_config: LearnerConfig
        lambda in its criterion is replaced cell by cell
    lambda_grid, rho_grid: list of float
    folds: int
    seed: int
        drives the fold assignment and every inner split
    estimation_fraction: float
    cores: int
        worker processes (1 runs serially)

    Returns:
    --------
    TuneResult with one table row per (lambda, rho) cell
    '''
    batch = TuneBatch(data, learner_config, lambda_grid, rho_grid, folds, seed, estimation_fraction)
    logger.info('Tuning {} cells with {}-fold cross-validation'.format(len(batch.case_list), folds))
    result = batch.run(cores)
    logger.info('Best cell: lambda = {}, rho = {} (ace_error = {:.6g})'.format(
        result.best_lambda, result.best_rho, result.best_score))
    return result
