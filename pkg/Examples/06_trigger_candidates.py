"""
06_trigger_candidates
---------------------
Held-out error against the number of trigger candidates searched per node.

Capping the candidates to a few treatment quantiles makes the trigger search
cheaper but coarser; this example sweeps the cap on the planted model.
"""

import os

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from trigtree.toolbox.data import split_dataset
from trigtree.toolbox.estimators import CriterionConfig
from trigtree.toolbox.evaluation import ace_error
from trigtree.toolbox.learner import LearnerConfig, train
from trigtree.toolbox.synthetic import default_model, generate


def main():
    this_dir = os.path.dirname(os.path.abspath(__file__))
    example_out_dir = os.path.join(this_dir, 'examples_out')
    os.makedirs(example_out_dir, exist_ok=True)

    caps = [2, 5, 10, 50, None]
    rows = []
    for seed in range(5):
        split = split_dataset(generate(default_model(seed=seed), 1500), validation_fraction=0.3,
                              test_fraction=0.2, seed=seed)
        for cap in caps:
            config = LearnerConfig(criterion=CriterionConfig(kind='L', max_trigger_candidates=cap), max_depth=1)
            tree = train(split, config)
            rows.append({'seed': seed, 'cap': cap or 0, 'ace_error': ace_error(tree, split.test),
                         'left_trigger': tree.left.trigger if not tree.is_leaf else np.nan})

    table = pd.DataFrame(rows)
    means = table.groupby('cap', sort=False)['ace_error'].agg(['mean', 'std'])
    means.index = ['uncapped' if cap == 0 else str(cap) for cap in means.index]
    print(means)
    table.to_csv(os.path.join(example_out_dir, '06_trigger_candidates.csv'), index=False)

    fig, ax = plt.subplots(constrained_layout=True)
    ax.errorbar(np.arange(len(means)), means['mean'], yerr=means['std'], fmt='o-', capsize=3)
    ax.set_xticks(np.arange(len(means)))
    ax.set_xticklabels(means.index)
    ax.set_xlabel('Trigger candidates per node')
    ax.set_ylabel('Test ace_error')

    if False:
        plt.show()
    else:
        plt.savefig(os.path.join(example_out_dir, '06_trigger_candidates.png'))


if __name__ == "__main__":
    main()
