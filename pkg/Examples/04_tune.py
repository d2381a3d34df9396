"""
04_tune
-------
Cross-validated choice of lambda (cost weight) and rho (validation share).

In this example:

* Read a .yaml run configuration
* Score every (lambda, rho) cell of the grid by k-fold held-out ace_error
* Write the score table and a copy of the configuration with the winning cell
* Plot the score against lambda for each rho

The grid is evaluated on worker processes, as in a batch of simulations.
"""

import os

import matplotlib.pyplot as plt

from trigtree.toolbox.inputs.validation import load_trigtree_yaml
from trigtree.toolbox.tune import config_to_objs, load_run_data, tune
from trigtree.toolbox.util.FileTools import update_yaml


def main():
    this_dir = os.path.dirname(os.path.abspath(__file__))
    tune_dir = os.path.join(this_dir, 'Tune_Cases')
    parameter_filename = os.path.join(tune_dir, 'default_synthetic.yaml')
    inps = load_trigtree_yaml(parameter_filename)

    example_out_dir = os.path.join(this_dir, 'examples_out')
    os.makedirs(example_out_dir, exist_ok=True)

    data = load_run_data(dict(inps, n_samples=1000))
    result = tune(data, config_to_objs(inps), inps['lambda_grid'], inps['rho_grid'], folds=inps['folds'],
                  seed=inps['seed'], cores=2)
    print(result.table)
    print('Best lambda = {}, best rho = {} (ace_error {:.4f})'.format(
        result.best_lambda, result.best_rho, result.best_score))

    result.table.to_csv(os.path.join(example_out_dir, '04_tune_table.csv'), index=False)
    update_yaml(parameter_filename, {'lambda': result.best_lambda, 'validation_fraction': result.best_rho},
                os.path.join(example_out_dir, '04_tuned.yaml'))

    fig, ax = plt.subplots(constrained_layout=True)
    for rho, cells in result.table.groupby('rho'):
        ax.plot(cells['lambda'], cells['ace_error'], 'o-', label='rho = {}'.format(rho))
    ax.set_xlabel('lambda')
    ax.set_ylabel('Cross-validated ace_error')
    ax.legend()

    if False:
        plt.show()
    else:
        plt.savefig(os.path.join(example_out_dir, '04_tune.png'))


if __name__ == "__main__":
    main()
