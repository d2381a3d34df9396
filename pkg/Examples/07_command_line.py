"""
07_command_line
---------------
Run the trigtree command line on a CSV file with a discrete feature.

In this example:

* Build a smoking-style dataset: exposure (log packyears) against medical
  expenditure, with gender (0/1), age started and income as features
* Write it as CSV, the way real data would arrive
* Run `trigtree train`, `evaluate`, `predict` and `export-dot` on the
  Tune_Cases/smoking.yaml configuration

The same commands run from a shell, e.g.
``trigtree --config Tune_Cases/smoking.yaml train --tree-file tree.yaml``
"""

import os

import numpy as np

from trigtree.toolbox import cli
from trigtree.toolbox.synthetic import PlantedModel, Subgroup, generate

inf = np.inf


def smoking_data(n=3000, seed=0):
    # x0 -> male, x1 -> age started, x2 -> income
    model = PlantedModel(
        dimension=3,
        subgroups=[Subgroup(bounds=((-inf, 0.5), (-inf, 0.4), (-inf, inf)), trigger=2.0, effect=0.5),
                   Subgroup(bounds=((-inf, 0.5), (0.4, inf), (-inf, inf)), trigger=4.0, effect=0.2),
                   Subgroup(bounds=((0.5, inf), (-inf, inf), (-inf, inf)), trigger=3.0, effect=1.0)],
        noise_sd=0.5,
        treatment_range=(0.0, 5.0),
        baseline_intercept=1.0,
        baseline_coefficients=(0.5, 0.0, 0.8),
        seed=seed,
    )
    frame = generate(model, n).to_frame(treatment_column='log_packyears', outcome_column='expenditure')
    frame = frame.rename(columns={'x0': 'male', 'x1': 'age_started', 'x2': 'income'})
    frame['male'] = (frame['male'] >= 0.5).astype(int)
    frame['age_started'] = np.round(12.0 + 30.0 * frame['age_started'], 1)
    frame['income'] = np.round(20000.0 + 80000.0 * frame['income'], -2)
    return frame


def main():
    this_dir = os.path.dirname(os.path.abspath(__file__))
    tune_dir = os.path.join(this_dir, 'Tune_Cases')
    parameter_filename = os.path.join(tune_dir, 'smoking.yaml')
    example_out_dir = os.path.join(this_dir, 'examples_out')
    os.makedirs(example_out_dir, exist_ok=True)

    smoking_data().to_csv(os.path.join(example_out_dir, '07_smoking.csv'), index=False)

    tree_file = os.path.join(example_out_dir, '07_tree.yaml')
    commands = [
        ['train', '--tree-file', tree_file],
        ['evaluate', '--tree-file', tree_file, '--alpha', '0.05',
         '--report-file', os.path.join(example_out_dir, '07_report.txt')],
        ['predict', '--tree-file', tree_file, '--predictions-file', os.path.join(example_out_dir, '07_predictions.csv')],
        ['export-dot', '--tree-file', tree_file, '--dot-file', os.path.join(example_out_dir, '07_tree.dot')],
    ]
    for command in commands:
        status = cli.main(['--config', parameter_filename] + command)
        print('trigtree {}: exit status {}'.format(command[0], status))
        if status != 0:
            raise RuntimeError('trigtree {} failed'.format(command[0]))


if __name__ == "__main__":
    main()
