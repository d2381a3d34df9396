"""
05_compare_methods
------------------
Compare the splitting criteria over repeated draws.

In this example:

* Train CT-A, CT-H, CT-L, CT-HL and CT-HV trees on the same splits, for several seeds
* Score each tree and its significant leaves (the P variants) on the test units
* Tabulate mean and sd of ace_error with sd-overlap significance
* Plot the comparison
"""

import os
from dataclasses import replace

import matplotlib.pyplot as plt
import numpy as np

from trigtree.toolbox.data import split_dataset
from trigtree.toolbox.errors import DegenerateGroup, EmptyData
from trigtree.toolbox.estimators import CriterionConfig, CriterionKind
from trigtree.toolbox.evaluation import ace_error, compare_methods
from trigtree.toolbox.learner import LearnerConfig, train
from trigtree.toolbox.pruning import annotate_p_values, significant_leaves
from trigtree.toolbox.synthetic import default_model, generate


def main():
    this_dir = os.path.dirname(os.path.abspath(__file__))
    example_out_dir = os.path.join(this_dir, 'examples_out')
    os.makedirs(example_out_dir, exist_ok=True)

    seeds = range(5)
    base = LearnerConfig(criterion=CriterionConfig(lam=0.5), max_depth=2)
    errors = {}

    for seed in seeds:
        data = generate(default_model(seed=seed, noise_sd=0.5), 1500)
        # estimation part for the honest criteria
        split = split_dataset(data, validation_fraction=0.3, estimation_fraction=0.2, test_fraction=0.2, seed=seed)
        for kind in CriterionKind:
            config = replace(base, criterion=replace(base.criterion, kind=kind))
            tree = annotate_p_values(train(split, config), split, kind)
            for label, selected in ((kind.label, None), (kind.label + 'P', significant_leaves(tree, 0.05))):
                try:
                    error = ace_error(tree, split.test, selected)
                except (EmptyData, DegenerateGroup) as e:
                    print('{} seed {}: {}'.format(label, seed, e))
                    error = np.nan
                errors.setdefault(label, []).append(error)

    table = compare_methods(errors)
    print(table[['mean', 'sd', 'n', 'sig_vs_CT-A', 'sig_vs_CT-L']])
    table.to_csv(os.path.join(example_out_dir, '05_compare.csv'))

    fig, ax = plt.subplots(constrained_layout=True)
    ax.bar(table.index, table['mean'], yerr=table['sd'], capsize=3)
    ax.set_ylabel('Test ace_error')
    ax.tick_params(axis='x', rotation=45)

    if False:
        plt.show()
    else:
        plt.savefig(os.path.join(example_out_dir, '05_compare.png'))


if __name__ == "__main__":
    main()
