# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Synthetic data with planted subgroups, triggers and effects.

Features are uniform on the unit cube and the treatment amount is uniform on
the treatment range, drawn independently of the features, so treatment
assignment is unconfounded by construction. A unit in subgroup g responds
with effect tau_g once its treatment reaches the subgroup trigger theta_g.

Classes:
--------
Subgroup
PlantedModel

Methods:
--------
generate
oracle_ice
default_model
null_model
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from trigtree.toolbox.data import Dataset, substream
from trigtree.toolbox.errors import ConfigError, InputValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Subgroup:
    """
    Axis-aligned region low_j <= x_j < high_j on every feature j (closed on
    the left), with its planted trigger and effect.
    """
    bounds: Tuple[Tuple[float, float], ...]
    trigger: float
    effect: float

    def contains(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        inside = np.ones(X.shape[0], dtype=bool)
        for j, (low, high) in enumerate(self.bounds):
            inside &= (X[:, j] >= low) & (X[:, j] < high)
        return inside

    def to_dict(self):
        region = []
        for j, (low, high) in enumerate(self.bounds):
            constraint = {}
            if np.isfinite(low):
                constraint['low'] = float(low)
            if np.isfinite(high):
                constraint['high'] = float(high)
            if constraint:
                region.append(dict(feature=j, **constraint))
        return {'region': region, 'trigger': float(self.trigger), 'effect': float(self.effect)}

    @classmethod
    def from_dict(cls, d, dimension):
        bounds = [[-np.inf, np.inf] for _ in range(dimension)]
        for constraint in d.get('region', []) or []:
            j = int(constraint['feature'])
            if not 0 <= j < dimension:
                raise ConfigError('trigtree.toolbox.synthetic: region feature {} outside dimension {}'.format(j, dimension))
            if constraint.get('low') is not None:
                bounds[j][0] = float(constraint['low'])
            if constraint.get('high') is not None:
                bounds[j][1] = float(constraint['high'])
        return cls(bounds=tuple(tuple(b) for b in bounds), trigger=float(d['trigger']), effect=float(d['effect']))


@dataclass(frozen=True)
class PlantedModel:
    dimension: int
    subgroups: List[Subgroup]
    noise_sd: float = 0.1
    treatment_range: Tuple[float, float] = (0.0, 10.0)
    baseline_intercept: float = 0.0
    baseline_coefficients: Tuple[float, ...] = field(default=())
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if int(self.dimension) < 1:
            raise ConfigError('trigtree.toolbox.synthetic: dimension must be positive')
        if not self.subgroups:
            raise ConfigError('trigtree.toolbox.synthetic: at least one subgroup is required')
        if self.noise_sd < 0:
            raise ConfigError('trigtree.toolbox.synthetic: noise_sd must be nonnegative')
        t_min, t_max = self.treatment_range
        if not t_min < t_max:
            raise ConfigError('trigtree.toolbox.synthetic: treatment_range must be increasing')
        if self.baseline_coefficients and len(self.baseline_coefficients) != self.dimension:
            raise ConfigError('trigtree.toolbox.synthetic: expected {} baseline coefficients'.format(self.dimension))
        for g, sub in enumerate(self.subgroups):
            if len(sub.bounds) != self.dimension:
                raise ConfigError('trigtree.toolbox.synthetic: subgroup {} bounds do not match the dimension'.format(g))
            if not t_min < sub.trigger < t_max:
                raise ConfigError('trigtree.toolbox.synthetic: subgroup {} trigger {} not strictly inside {}'.format(
                    g, sub.trigger, self.treatment_range))
        self._check_partition()

    def _check_partition(self):
        # Membership is constant between consecutive region bounds, so the
        # left end of every cell of the bound grid inside [0, 1) is a witness
        axes = []
        for j in range(self.dimension):
            cuts = {b for sub in self.subgroups for b in sub.bounds[j] if np.isfinite(b) and 0.0 < b < 1.0}
            axes.append(sorted({0.0} | cuts))
        for point in itertools.product(*axes):
            hits = sum(int(sub.contains(point)[0]) for sub in self.subgroups)
            if hits != 1:
                raise ConfigError('trigtree.toolbox.synthetic: point {} lies in {} subgroups; regions must '
                                  'partition the unit cube'.format(point, hits))

    def region_index(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        index = np.full(X.shape[0], -1, dtype=int)
        for g, sub in enumerate(self.subgroups):
            index[sub.contains(X) & (index < 0)] = g
        return index

    def baseline(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.baseline_coefficients:
            return np.full(X.shape[0], float(self.baseline_intercept))
        return self.baseline_intercept + X @ np.asarray(self.baseline_coefficients, dtype=float)

    def to_dict(self):
        return {'dimension': int(self.dimension),
                'noise_sd': float(self.noise_sd),
                'treatment_range': [float(v) for v in self.treatment_range],
                'baseline': {'intercept': float(self.baseline_intercept),
                             'coefficients': [float(c) for c in self.baseline_coefficients]},
                'subgroups': [sub.to_dict() for sub in self.subgroups],
                'seed': int(self.seed)}

    @classmethod
    def from_dict(cls, d, seed=None):
        dimension = int(d['dimension'])
        baseline = d.get('baseline', {}) or {}
        return cls(
            dimension=dimension,
            subgroups=[Subgroup.from_dict(sub, dimension) for sub in d['subgroups']],
            noise_sd=float(d.get('noise_sd', 0.1)),
            treatment_range=tuple(float(v) for v in d.get('treatment_range', (0.0, 10.0))),
            baseline_intercept=float(baseline.get('intercept', 0.0)),
            baseline_coefficients=tuple(float(c) for c in baseline.get('coefficients', []) or []),
            seed=int(d.get('seed', 0) if seed is None else seed),
        )


def generate(model: PlantedModel, n, seed=None):
    '''
    Draw n units from a planted model.

    Parameters:
    -----------
    model: PlantedModel
    n: int
    seed: int, optional
        overrides model.seed; drives the 'generate' substream

    Returns:
    --------
    Dataset with true_effect set to each unit's planted effect
    '''
    if int(n) < 1:
        raise InputValidationError('trigtree.toolbox.synthetic: n must be at least 1, got {}'.format(n))
    rng = substream(model.seed if seed is None else seed, 'generate')
    t_min, t_max = model.treatment_range

    X = rng.uniform(0.0, 1.0, size=(n, model.dimension))
    t = rng.uniform(t_min, t_max, size=n)
    noise = model.noise_sd * rng.standard_normal(n)

    region = model.region_index(X)
    effect = np.array([sub.effect for sub in model.subgroups])[region]
    trigger = np.array([sub.trigger for sub in model.subgroups])[region]
    outcome = model.baseline(X) + effect * (t >= trigger) + noise

    logger.debug('Generated {} units from a {}-subgroup model'.format(n, len(model.subgroups)))
    return Dataset(features=X, treatment=t, outcome=outcome, true_effect=effect)


def oracle_ice(model: PlantedModel, features):
    '''
    Planted (effect, trigger) of the region containing features.
    '''
    features = np.asarray(features, dtype=float).reshape(-1)
    if len(features) != model.dimension:
        raise InputValidationError('trigtree.toolbox.synthetic: expected {} features, got {}'.format(
            model.dimension, len(features)))
    g = model.region_index(features)[0]
    if g < 0:
        raise InputValidationError('trigtree.toolbox.synthetic: {} lies in no planted region'.format(features))
    return model.subgroups[g].effect, model.subgroups[g].trigger


def default_model(seed=0, noise_sd=0.1):
    '''
    Two subgroups split on feature 0 at 0.5: (trigger 3, effect +1) on the
    left, (trigger 7, effect -1) on the right; treatment on [0, 10], zero baseline.
    '''
    inf = np.inf
    return PlantedModel(
        dimension=2,
        subgroups=[Subgroup(bounds=((-inf, 0.5), (-inf, inf)), trigger=3.0, effect=1.0),
                   Subgroup(bounds=((0.5, inf), (-inf, inf)), trigger=7.0, effect=-1.0)],
        noise_sd=noise_sd,
        treatment_range=(0.0, 10.0),
        seed=seed,
    )


def null_model(dimension=2, noise_sd=1.0, seed=0):
    '''
    One region, zero effect: outcome is pure noise.
    '''
    return PlantedModel(
        dimension=dimension,
        subgroups=[Subgroup(bounds=tuple((-np.inf, np.inf) for _ in range(dimension)), trigger=5.0, effect=0.0)],
        noise_sd=noise_sd,
        treatment_range=(0.0, 10.0),
        seed=seed,
    )
