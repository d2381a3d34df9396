# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
File processing for trigtree: CSV data, tree files, training summaries,
evaluation reports, predictions and DOT export.

Methods:
-----------
load_csv
load_feature_matrix
write_dataset_csv
tree_to_dict
tree_from_dict
write_tree
read_tree
write_summary
write_report
read_report
write_predictions
export_dot
"""
import os

import numpy as np
import pandas as pd
import yaml

import trigtree.toolbox
from trigtree.toolbox.data import CONTINUOUS, DISCRETE, Dataset
from trigtree.toolbox.errors import ConfigError, CSVSchemaError, EmptyData, InputValidationError, WrongFormatError
from trigtree.toolbox.inputs.validation import schema_descriptions
from trigtree.toolbox.learner import SplitRule, TreeNode, count_nodes, iter_nodes, leaves, tree_depth
from trigtree.toolbox.util.FileTools import remove_numpy

TREE_FORMAT_VERSION = '1'

# Descriptions of written results (inputs take theirs from the schema)
RESULT_DESCRIPTIONS = {
    'depth': 'Depth of the tree (root only = 0)',
    'n_leaves': 'Number of leaves',
    'n_nodes': 'Number of nodes',
    'n_train': 'Training units at the root',
    'root_ace': 'Average causal effect at the root',
    'root_trigger': 'Trigger at the root (nan in binary mode)',
    'ace_error': 'Mean over evaluated leaves of |tau_hat - tau_test| / (|tau_hat| + |tau_test|)',
    'unit_smape': 'Mean over units of |tau - tau_hat| / (|tau| + |tau_hat|)',
    'leaf_variance': 'Unbiased variance of the leaf effects',
    'mahalanobis_balance': 'Mean over leaves of the average Mahalanobis distance to the opposite arm',
    'n_skipped': 'Leaves skipped for an empty test arm',
}


# ---------------------------------------------------------------------------
# CSV data
# ---------------------------------------------------------------------------

def _numeric_column(frame, column):
    raw = frame[column]
    values = pd.to_numeric(raw, errors='coerce')
    bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float))
    if bad.any():
        i = int(np.flatnonzero(bad.to_numpy())[0])
        if pd.isna(raw.iloc[i]):
            raise CSVSchemaError('missing value', row=i + 1, column=column)
        raise CSVSchemaError('non-numeric value "{}"'.format(raw.iloc[i]), row=i + 1, column=column)
    return values.astype(float)


def load_csv(path, feature_columns=None, treatment_column='treatment', outcome_column='outcome',
             true_effect_column=None, discrete_columns=()):
    '''
    Load a UTF-8 CSV with a header row into a Dataset.

    Parameters:
    -----------
    path: str
    feature_columns: list of str, optional
        default every column without another role
    treatment_column, outcome_column: str
    true_effect_column: str, optional
    discrete_columns: list of str
        feature columns with ordinal integer levels

    Rows are counted from 1 (the first data row) in error messages.
    '''
    try:
        frame = pd.read_csv(path, encoding='utf-8')
    except FileNotFoundError:
        raise InputValidationError('trigtree.toolbox.utilities: data file {} not found'.format(path))
    except pd.errors.EmptyDataError:
        raise EmptyData('trigtree.toolbox.utilities: data file {} is empty'.format(path))
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise CSVSchemaError('trigtree.toolbox.utilities: cannot parse {}: {}'.format(path, e))

    roles = [c for c in (treatment_column, outcome_column, true_effect_column) if c is not None]
    if len(set(roles)) != len(roles):
        raise ConfigError('trigtree.toolbox.utilities: treatment, outcome and true-effect columns must differ')
    if not feature_columns:
        feature_columns = [c for c in frame.columns if c not in roles]
    feature_columns = list(feature_columns)
    overlap = set(feature_columns) & set(roles)
    if overlap or len(set(feature_columns)) != len(feature_columns):
        raise ConfigError('trigtree.toolbox.utilities: column roles must be disjoint (shared: {})'.format(
            sorted(overlap) or 'duplicate feature column'))
    for column in feature_columns + roles:
        if column not in frame.columns:
            raise CSVSchemaError('missing column', column=column)
    for column in discrete_columns:
        if column not in feature_columns:
            raise ConfigError('trigtree.toolbox.utilities: discrete column "{}" is not a feature column'.format(column))
    if not feature_columns:
        raise ConfigError('trigtree.toolbox.utilities: no feature columns in {}'.format(path))
    if len(frame) == 0:
        raise EmptyData('trigtree.toolbox.utilities: data file {} has no rows'.format(path))

    numeric = pd.DataFrame({column: _numeric_column(frame, column) for column in feature_columns + roles})
    for column in discrete_columns:
        values = numeric[column].to_numpy()
        off = np.flatnonzero(values != np.round(values))
        if len(off):
            raise CSVSchemaError('non-integer level {} in a discrete column'.format(values[off[0]]),
                                 row=int(off[0]) + 1, column=column)

    return Dataset.from_frame(numeric, feature_columns, treatment_column, outcome_column,
                              true_effect_column=true_effect_column, discrete_columns=list(discrete_columns))


def load_feature_matrix(path, feature_columns):
    '''
    Feature columns only, for prediction on units without treatment or outcome.

    Returns:
    --------
    X: array (n, d)
    '''
    try:
        frame = pd.read_csv(path, encoding='utf-8')
    except FileNotFoundError:
        raise InputValidationError('trigtree.toolbox.utilities: data file {} not found'.format(path))
    except pd.errors.EmptyDataError:
        raise EmptyData('trigtree.toolbox.utilities: data file {} is empty'.format(path))
    if not feature_columns:
        raise ConfigError('trigtree.toolbox.utilities: no feature columns to read from {}'.format(path))
    for column in feature_columns:
        if column not in frame.columns:
            raise CSVSchemaError('missing column', column=column)
    if len(frame) == 0:
        raise EmptyData('trigtree.toolbox.utilities: data file {} has no rows'.format(path))
    return np.column_stack([_numeric_column(frame, column).to_numpy() for column in feature_columns])


def write_dataset_csv(data: Dataset, fname, treatment_column='treatment', outcome_column='outcome',
                      true_effect_column='true_effect'):
    data.to_frame(treatment_column, outcome_column, true_effect_column).to_csv(fname, index=False)


# ---------------------------------------------------------------------------
# Tree files
# ---------------------------------------------------------------------------

def _node_to_dict(node: TreeNode):
    return {
        'node_id': node.node_id,
        'depth': node.depth,
        'score': node.score,
        'ace': node.ace,
        'trigger': node.trigger,
        'n_treated': node.n_treated,
        'n_control': node.n_control,
        'p_value': node.p_value,
        'rule': None if node.is_leaf else {'feature': node.rule.feature, 'threshold': node.rule.threshold},
        'left': None if node.is_leaf else _node_to_dict(node.left),
        'right': None if node.is_leaf else _node_to_dict(node.right),
    }


def tree_to_dict(tree: TreeNode, feature_names=None, feature_kinds=None, criterion=None):
    '''
    Plain nested dictionary of a tree, as written to tree files.
    '''
    dimension = tree.dimension
    if feature_names is None and dimension is not None:
        feature_names = ['x{}'.format(j) for j in range(dimension)]
    if feature_kinds is None and feature_names is not None:
        feature_kinds = [CONTINUOUS] * len(feature_names)
    return remove_numpy({
        'format_version': TREE_FORMAT_VERSION,
        'dimension': dimension if dimension is not None else (None if feature_names is None else len(feature_names)),
        'feature_names': None if feature_names is None else list(feature_names),
        'feature_kinds': None if feature_kinds is None else list(feature_kinds),
        'criterion': None if criterion is None else criterion.to_dict(),
        'root': _node_to_dict(tree),
    })


_NODE_KEYS = ('node_id', 'depth', 'score', 'ace', 'trigger', 'n_treated', 'n_control', 'p_value', 'rule', 'left', 'right')


def _node_from_dict(d, dimension):
    if not isinstance(d, dict) or any(key not in d for key in _NODE_KEYS):
        raise WrongFormatError('trigtree.toolbox.utilities: tree node must have the keys {}'.format(', '.join(_NODE_KEYS)))
    is_leaf = d['rule'] is None
    if is_leaf != (d['left'] is None) or is_leaf != (d['right'] is None):
        raise WrongFormatError('trigtree.toolbox.utilities: node {} must have a rule and both children, or none'.format(
            d['node_id']))
    try:
        node = TreeNode(
            node_id=int(d['node_id']),
            depth=int(d['depth']),
            score=float(d['score']),
            ace=float(d['ace']),
            trigger=None if d['trigger'] is None else float(d['trigger']),
            n_treated=int(d['n_treated']),
            n_control=int(d['n_control']),
            p_value=None if d['p_value'] is None else float(d['p_value']),
            dimension=dimension,
        )
        if not is_leaf:
            node.rule = SplitRule(feature=int(d['rule']['feature']), threshold=float(d['rule']['threshold']))
    except (TypeError, ValueError, KeyError) as e:
        raise WrongFormatError('trigtree.toolbox.utilities: bad value in tree node: {}'.format(e))
    if not np.isfinite(node.ace):
        raise WrongFormatError('trigtree.toolbox.utilities: node {} has a non-finite effect'.format(node.node_id))
    if not is_leaf:
        if dimension is not None and not 0 <= node.rule.feature < dimension:
            raise WrongFormatError('trigtree.toolbox.utilities: node {} splits on feature {} outside dimension {}'.format(
                node.node_id, node.rule.feature, dimension))
        node.left = _node_from_dict(d['left'], dimension)
        node.right = _node_from_dict(d['right'], dimension)
    return node


def tree_from_dict(d):
    '''
    Inverse of tree_to_dict.

    Returns:
    --------
    tree: TreeNode
    meta: dict with format_version, dimension, feature_names, feature_kinds, criterion
    '''
    if not isinstance(d, dict) or 'root' not in d:
        raise WrongFormatError('trigtree.toolbox.utilities: not a tree file (no root)')
    if str(d.get('format_version')) != TREE_FORMAT_VERSION:
        raise WrongFormatError('trigtree.toolbox.utilities: unsupported tree format version {}'.format(
            d.get('format_version')))
    dimension = d.get('dimension')
    dimension = None if dimension is None else int(dimension)
    meta = {key: d.get(key) for key in ('format_version', 'dimension', 'feature_names', 'feature_kinds', 'criterion')}
    return _node_from_dict(d['root'], dimension), meta


def write_tree(tree: TreeNode, fname, feature_names=None, feature_kinds=None, criterion=None):
    '''
    Write a tree file (YAML, one mapping per node, children nested).
    '''
    outdir = os.path.dirname(fname)
    if outdir and not os.path.isdir(outdir):
        os.makedirs(outdir)
    with open(fname, 'w') as f:
        yaml.safe_dump(tree_to_dict(tree, feature_names, feature_kinds, criterion), f,
                       sort_keys=False, default_flow_style=False)


def read_tree(fname):
    '''
    Read a tree file.

    Returns:
    --------
    tree: TreeNode
    meta: dict
    '''
    try:
        with open(fname) as f:
            d = yaml.safe_load(f)
    except OSError as e:
        raise InputValidationError('trigtree.toolbox.utilities: cannot read tree file {}: {}'.format(fname, e))
    except yaml.YAMLError as e:
        raise WrongFormatError('trigtree.toolbox.utilities: corrupt tree file {}: {}'.format(fname, e))
    return tree_from_dict(d)


# ---------------------------------------------------------------------------
# Key/value text files
# ---------------------------------------------------------------------------

def _fmt_value(value):
    if value is None:
        return 'nan'
    if isinstance(value, str):
        return '"{}"'.format(value)
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return '{:d}'.format(int(value))
    return repr(float(value))


def _write_value(file, key, value, description=''):
    file.write('{:<20}  ! {:<20} - {}\n'.format(_fmt_value(value), key, description))


def _write_leaf_table(file, rows, prefix='leaf'):
    for leaf_id, values in rows:
        file.write('{} ! {}_{}\n'.format(' '.join(_fmt_value(v) for v in values), prefix, leaf_id))


def write_summary(tree: TreeNode, fname, criterion=None, feature_names=None):
    '''
    Training summary: tree shape and per-leaf effect, trigger and group sizes.
    '''
    descriptions = schema_descriptions()
    with open(fname, 'w') as file:
        file.write('! trigtree training summary\n')
        file.write('!    - File written using trigtree version {}\n'.format(trigtree.toolbox.__version__))
        file.write('\n')
        if criterion is not None:
            file.write('!------- CRITERION ---------------------------------------------------\n')
            _write_value(file, 'criterion', criterion.kind.value, descriptions['criterion'])
            _write_value(file, 'lambda', criterion.lam, descriptions['lambda'])
            _write_value(file, 'trigger_mode', criterion.trigger_mode, descriptions['trigger_mode'])
            file.write('\n')
        file.write('!------- TREE ---------------------------------------------------------\n')
        _write_value(file, 'depth', tree_depth(tree), RESULT_DESCRIPTIONS['depth'])
        _write_value(file, 'n_leaves', len(leaves(tree)), RESULT_DESCRIPTIONS['n_leaves'])
        _write_value(file, 'n_nodes', count_nodes(tree), RESULT_DESCRIPTIONS['n_nodes'])
        _write_value(file, 'n_train', tree.n, RESULT_DESCRIPTIONS['n_train'])
        _write_value(file, 'root_ace', tree.ace, RESULT_DESCRIPTIONS['root_ace'])
        _write_value(file, 'root_trigger', tree.trigger, RESULT_DESCRIPTIONS['root_trigger'])
        file.write('\n')
        file.write('!------- PER-LEAF TABLE: n_treated n_control ace trigger depth --------\n')
        _write_leaf_table(file, [(leaf.node_id, (leaf.n_treated, leaf.n_control, leaf.ace, leaf.trigger, leaf.depth))
                                 for leaf in leaves(tree)])


def write_report(report, fname, alpha=None, pruned=None, config=None):
    '''
    Evaluation report: metrics as `value ! key - description` lines and a
    per-leaf table (n tau_hat tau_test p_value). With alpha, the metrics
    over significant leaves follow with a pruned_ prefix.

    Parameters:
    -----------
    report: EffectReport
    fname: str
    alpha: float, optional
    pruned: EffectReport, optional
        metrics over the significant leaves
    config: dict, optional
        run configuration; criterion and seed are echoed
    '''
    descriptions = schema_descriptions()
    with open(fname, 'w') as file:
        file.write('! trigtree evaluation report\n')
        file.write('!    - File written using trigtree version {}\n'.format(trigtree.toolbox.__version__))
        file.write('\n')
        if config is not None:
            file.write('!------- RUN ----------------------------------------------------------\n')
            for key in ('criterion', 'lambda', 'validation_fraction', 'seed'):
                if key in config:
                    _write_value(file, key, config[key], descriptions[key])
            file.write('\n')
        _write_metrics(file, report, prefix='')
        if alpha is not None:
            file.write('!------- PRUNED (significant leaves) ----------------------------------\n')
            _write_value(file, 'alpha', alpha, descriptions['alpha'])
            if pruned is not None:
                _write_metrics(file, pruned, prefix='pruned_')
            else:
                file.write('! no significant leaf could be evaluated\n\n')


def _write_metrics(file, report, prefix):
    header = 'PRUNED METRICS' if prefix else 'METRICS'
    file.write('!------- {} {}\n'.format(header, '-' * (60 - len(header))))
    for key, value in report.to_dict().items():
        _write_value(file, prefix + key, value, RESULT_DESCRIPTIONS.get(key, ''))
    file.write('\n')
    file.write('!------- {}PER-LEAF TABLE: n tau_hat tau_test p_value --------------\n'.format(prefix.upper()))
    _write_leaf_table(file, [(row.leaf_id, (row.n, row.tau_hat, row.tau_test, row.p_value)) for row in report.per_leaf],
                      prefix=prefix + 'leaf')
    file.write('\n')


def read_report(fname):
    '''
    Read a report or summary file.

    Returns:
    --------
    dict: scalar entries by key (floats, or str for quoted values) and table
        rows under their row key (e.g. leaf_3) as lists of floats
    '''
    values = {}
    with open(fname) as report:
        for line in report:

            # Skip whitespace and comment lines
            if (line[0] != '!') == (len(line.strip()) != 0):
                tokens = line.split()
                if '!' not in tokens:
                    raise WrongFormatError('trigtree.toolbox.utilities: bad line in {}: {}'.format(fname, line.strip()))
                bang = tokens.index('!')
                key = tokens[bang + 1]
                if bang != 1:                # table rows
                    values[key] = [float(x) for x in tokens[:bang]]
                else:
                    value = tokens[0]
                    # Remove printed quotations if string is in quotes
                    if value[0] in ('"', "'"):
                        values[key] = value[1:-1]
                    else:
                        values[key] = float(value)
    return values


def write_predictions(fname, ace, trigger, prescribed):
    pd.DataFrame({'ace': ace, 'trigger': trigger, 'prescribed_treatment': prescribed}).to_csv(fname, index=False)


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------

def _shade(ace, scale):
    # white at zero effect, deeper blue for positive, deeper red for negative
    level = 0.0 if scale == 0 else min(abs(ace) / scale, 1.0)
    channel = int(round(255 * (1.0 - 0.75 * level)))
    if ace > 0:
        return '#{0:02x}{0:02x}ff'.format(channel)
    if ace < 0:
        return '#ff{0:02x}{0:02x}'.format(channel)
    return '#ffffff'


def _fmt(value):
    return 'nan' if value is None else '{:.4g}'.format(value)


def export_dot(tree: TreeNode, feature_names=None, feature_kinds=None):
    '''
    Graphviz DOT text: one node per tree node, split nodes labelled with
    their rule, leaves with (ace, trigger, n, p) and filled by effect.
    '''
    scale = max(abs(leaf.ace) for leaf in leaves(tree))
    lines = ['digraph trigtree {',
             '    node [shape=box, style="rounded,filled", fontname="helvetica"];']
    for node in iter_nodes(tree):
        if node.is_leaf:
            label = 'ace = {}\\ntrigger = {}\\nn = {}\\np = {}'.format(
                _fmt(node.ace), _fmt(node.trigger), node.n, _fmt(node.p_value))
            lines.append('    n{} [label="{}", fillcolor="{}"];'.format(node.node_id, label, _shade(node.ace, scale)))
        else:
            j = node.rule.feature
            name = feature_names[j] if feature_names is not None else 'x{}'.format(j)
            kind = feature_kinds[j] if feature_kinds is not None else CONTINUOUS
            threshold = '{:d}'.format(int(node.rule.threshold)) if kind == DISCRETE else '{:.4g}'.format(node.rule.threshold)
            lines.append('    n{} [label="{} <= {}", fillcolor="#f2f2f2"];'.format(node.node_id, name, threshold))
    for node in iter_nodes(tree):
        if not node.is_leaf:
            lines.append('    n{} -> n{} [label="yes"];'.format(node.node_id, node.left.node_id))
            lines.append('    n{} -> n{} [label="no"];'.format(node.node_id, node.right.node_id))
    lines.append('}')
    return '\n'.join(lines) + '\n'
