import copy
import os

import numpy as np
import yaml

try:
    import ruamel_yaml as ry
except ImportError:
    try:
        import ruamel.yaml as ry
    except ImportError:
        raise ImportError('No module named ruamel.yaml or ruamel_yaml')

"""
Common utilities for the YAML I/O of run configurations and tree files
"""


def remove_numpy(vartree):
    # recursively move through nested dicts/lists, replacing numpy data types
    # with builtins before writing to yaml files

    if isinstance(vartree, dict):
        return {key: remove_numpy(val) for key, val in vartree.items()}
    if isinstance(vartree, (list, tuple)):
        return [remove_numpy(val) for val in vartree]
    if isinstance(vartree, np.ndarray):
        return remove_numpy(vartree.tolist())
    if isinstance(vartree, np.bool_):
        return bool(vartree)
    if isinstance(vartree, np.integer):
        return int(vartree)
    if isinstance(vartree, np.floating):
        return float(vartree)
    return vartree


def load_yaml(fname_input, package=0):
    # Import a .yaml file; package 1 keeps comments and key order (ruamel round trip)

    if package == 0:
        with open(fname_input) as f:
            data = yaml.safe_load(f)
        return data

    elif package == 1:
        with open(fname_input, 'r') as myfile:
            text_input = myfile.read()
        ryaml = ry.YAML()
        return ryaml.load(text_input)


def save_yaml(outdir, fname, data_out):
    # Human-facing yaml (configs): ruamel block style

    if not os.path.isdir(outdir) and outdir != '':
        os.makedirs(outdir)
    fname = os.path.join(outdir, fname)

    data_out = remove_numpy(copy.deepcopy(data_out))

    with open(fname, 'w') as f:
        ryaml = ry.YAML()
        ryaml.default_flow_style = False
        ryaml.width = float('inf')
        ryaml.indent(mapping=2, sequence=4, offset=2)
        ryaml.dump(data_out, f)


def update_yaml(fname_input, updates, fname_output):
    # Write a copy of fname_input with top-level keys replaced, keeping the
    # original comments and key order

    data = load_yaml(fname_input, package=1)
    if data is None:
        data = ry.comments.CommentedMap()
    for key, value in remove_numpy(dict(updates)).items():
        data[key] = value

    outdir = os.path.dirname(fname_output)
    if outdir and not os.path.isdir(outdir):
        os.makedirs(outdir)
    with open(fname_output, 'w') as f:
        ryaml = ry.YAML()
        ryaml.width = float('inf')
        ryaml.dump(data, f)
