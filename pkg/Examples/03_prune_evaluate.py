"""
03_prune_evaluate
-----------------
Prune a deep tree by leaf significance and evaluate it on held-out units.

In this example:

* Train a deep CT-A tree on the planted model with moderate noise
* Prune it at alpha = 0.05
* Evaluate the full tree, the pruned tree and the significant leaves
* Write an evaluation report and plot leaf effects against the held-out effects
"""

import os

import matplotlib.pyplot as plt

from trigtree.toolbox.data import split_dataset
from trigtree.toolbox.estimators import CriterionConfig
from trigtree.toolbox.evaluation import evaluate_tree
from trigtree.toolbox.learner import LearnerConfig, leaves, train
from trigtree.toolbox.pruning import annotate_p_values, prune, significant_leaves
from trigtree.toolbox.synthetic import default_model, generate
from trigtree.toolbox.utilities import write_report


def main():
    this_dir = os.path.dirname(os.path.abspath(__file__))
    example_out_dir = os.path.join(this_dir, 'examples_out')
    os.makedirs(example_out_dir, exist_ok=True)

    # Data: default planted model with noise sd 0.5
    data = generate(default_model(seed=3, noise_sd=0.5), 2000)
    split = split_dataset(data, validation_fraction=0.3, test_fraction=0.2, seed=3)

    # Deep adaptive tree, no cost term
    criterion = CriterionConfig(kind='A')
    tree = train(split, LearnerConfig(criterion=criterion, max_depth=4))
    pruned = prune(tree, split, alpha=0.05, kind=criterion.kind)
    print('Grown leaves: {}, after pruning: {}'.format(len(leaves(tree)), len(leaves(pruned))))

    # Metrics on the test units
    annotated = annotate_p_values(tree, split, criterion.kind)
    report = evaluate_tree(tree, split.test)
    report_pruned = evaluate_tree(pruned, split.test)
    report_significant = evaluate_tree(annotated, split.test, significant_leaves(annotated, 0.05))
    for label, r in (('CT-A', report), ('CT-A pruned', report_pruned), ('CT-AP', report_significant)):
        print('{:<12} ace_error = {:.4f}  unit_smape = {:.4f}  leaves = {}'.format(
            label, r.ace_error, r.unit_smape, r.n_leaves))

    write_report(report, os.path.join(example_out_dir, '03_report.txt'), alpha=0.05, pruned=report_significant)

    # Training leaf effect vs held-out leaf effect
    fig, ax = plt.subplots(constrained_layout=True)
    for label, r, marker in (('grown', report, 'o'), ('pruned', report_pruned, 's')):
        ax.plot([row.tau_hat for row in r.per_leaf], [row.tau_test for row in r.per_leaf], marker,
                label=label, fillstyle='none')
    ax.plot([-1.5, 1.5], [-1.5, 1.5], 'k--', linewidth=0.8)
    ax.set_xlabel('Leaf ACE (training)')
    ax.set_ylabel('Leaf ACE (test)')
    ax.legend()

    if False:
        plt.show()
    else:
        plt.savefig(os.path.join(example_out_dir, '03_leaf_effects.png'))


if __name__ == "__main__":
    main()
