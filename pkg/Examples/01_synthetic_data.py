"""
01_synthetic_data
-----------------
Draw units from a planted subgroup model.

* Read .yaml run configuration
* Build the planted model from its synthetic_model block
* Generate data and write it as CSV
* Plot outcome against treatment per subgroup
"""

# Python Modules
import os

import matplotlib.pyplot as plt
import numpy as np

# trigtree Modules
from trigtree.toolbox.inputs.validation import load_trigtree_yaml
from trigtree.toolbox.synthetic import PlantedModel, generate, oracle_ice
from trigtree.toolbox.utilities import write_dataset_csv


def main():
    # Load yaml file
    this_dir = os.path.dirname(os.path.abspath(__file__))
    tune_dir = os.path.join(this_dir, 'Tune_Cases')
    parameter_filename = os.path.join(tune_dir, 'default_synthetic.yaml')
    inps = load_trigtree_yaml(parameter_filename)

    # Planted model and data
    model = PlantedModel.from_dict(inps['synthetic_model'], seed=inps['seed'])
    data = generate(model, inps['n_samples'])
    print(data)
    for x in ([0.25, 0.5], [0.75, 0.5]):
        effect, trigger = oracle_ice(model, x)
        print('x = {}: effect {} once treatment >= {}'.format(x, effect, trigger))

    example_out_dir = os.path.join(this_dir, 'examples_out')
    if not os.path.isdir(example_out_dir):
        os.makedirs(example_out_dir)
    write_dataset_csv(data, os.path.join(example_out_dir, '01_synthetic.csv'))

    # Outcome against treatment, one panel per planted region
    region = model.region_index(data.features)
    fig, ax = plt.subplots(1, len(model.subgroups), constrained_layout=True, sharey=True)
    for g, sub in enumerate(model.subgroups):
        rows = region == g
        ax[g].plot(data.treatment[rows], data.outcome[rows], '.', markersize=2)
        ax[g].axvline(sub.trigger, color='k', linestyle='--')
        ax[g].set_xlabel('Treatment')
        ax[g].set_title('Region {}: effect {:+g}'.format(g, sub.effect))
    ax[0].set_ylabel('Outcome')
    print('Treated share at the planted triggers: {}'.format(
        [float(np.mean(data.treatment[region == g] >= sub.trigger)) for g, sub in enumerate(model.subgroups)]))

    if False:
        plt.show()
    else:
        plt.savefig(os.path.join(example_out_dir, '01_synthetic.png'))


if __name__ == '__main__':
    main()
