"""
02_train_tree
-------------
Train a trigger-based causal tree.

In this example:

* Read a .yaml run configuration
* Generate planted data and split it into train/validation/test
* Train a CT-L tree
* Write the tree file, the training summary and a DOT drawing
* Predict effects and prescribed triggers for new units
"""

# Python modules
import os

import numpy as np

# trigtree toolbox modules
from trigtree.toolbox.data import split_dataset
from trigtree.toolbox.inputs.validation import load_trigtree_yaml
from trigtree.toolbox.learner import leaves, predict, prescribe, train
from trigtree.toolbox.tune import config_to_objs, load_run_data
from trigtree.toolbox.utilities import export_dot, read_tree, write_summary, write_tree


def main():
    # Load yaml file
    this_dir = os.path.dirname(os.path.abspath(__file__))
    tune_dir = os.path.join(this_dir, 'Tune_Cases')
    parameter_filename = os.path.join(tune_dir, 'default_synthetic.yaml')
    inps = load_trigtree_yaml(parameter_filename)

    # Data and learner settings
    data = load_run_data(inps)
    split = split_dataset(data, validation_fraction=inps['validation_fraction'],
                          test_fraction=inps['test_fraction'], seed=inps['seed'])
    learner_config = config_to_objs(inps)

    # Train
    tree = train(split, learner_config)
    for leaf in leaves(tree):
        print('Leaf {}: ACE = {:+.3f} once treatment >= {:.3f} ({} treated, {} control)'.format(
            leaf.node_id, leaf.ace, leaf.trigger, leaf.n_treated, leaf.n_control))

    # Write tree, summary and drawing
    example_out_dir = os.path.join(this_dir, 'examples_out')
    if not os.path.isdir(example_out_dir):
        os.makedirs(example_out_dir)
    tree_file = os.path.join(example_out_dir, '02_tree.yaml')
    write_tree(tree, tree_file, data.feature_names, data.feature_kinds, learner_config.criterion)
    write_summary(tree, os.path.join(example_out_dir, '02_tree.summary.txt'), learner_config.criterion,
                  data.feature_names)
    with open(os.path.join(example_out_dir, '02_tree.dot'), 'w') as f:
        f.write(export_dot(tree, data.feature_names, data.feature_kinds))

    # Read it back and prescribe
    tree, meta = read_tree(tree_file)
    for x in (np.array([0.2, 0.5]), np.array([0.8, 0.5])):
        ace, trigger = predict(tree, x)
        print('x = {}: ACE {:+.3f} at trigger {:.3f}, prescribed treatment {}'.format(
            x, ace, trigger, prescribe(tree, x)))


if __name__ == "__main__":
    main()
