# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Command line interface of the trigtree toolbox.

    trigtree [--config run.yaml] [--verbose] [--log-file FILE] COMMAND [options]

Commands: generate, train, prune, predict, evaluate, tune, export-dot, compare.
Options override the configuration file. Exit code 0 on success, 2 on invalid
input (data, configuration or files), 1 on any other error.
"""
import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np
import pandas as pd

from trigtree.toolbox.data import split_dataset
from trigtree.toolbox.errors import EmptyData, InputValidationError
from trigtree.toolbox.estimators import CriterionConfig, CriterionKind
from trigtree.toolbox.evaluation import evaluate_tree
from trigtree.toolbox.inputs.validation import load_trigtree_yaml, validate_config
from trigtree.toolbox.learner import predict_batch, train
from trigtree.toolbox.pruning import annotate_p_values, prune, significant_leaves
from trigtree.toolbox.tune import config_to_objs, load_run_data, tune
from trigtree.toolbox.util.FileTools import load_yaml, save_yaml, update_yaml
from trigtree.toolbox.utilities import (export_dot, load_feature_matrix, read_tree, write_dataset_csv,
                                        write_predictions, write_report, write_summary, write_tree)

logger = logging.getLogger(__name__)


def _float_list(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma-separated numbers, got "{}"'.format(text))


def _str_list(text):
    return [v.strip() for v in text.split(',') if v.strip()]


# (flag, config key, type, help)
CONFIG_FLAGS = [
    ('--data', 'data_path', str, 'input CSV'),
    ('--n-samples', 'n_samples', int, 'units drawn from the synthetic model'),
    ('--feature-columns', 'feature_columns', _str_list, 'comma-separated feature columns'),
    ('--treatment-column', 'treatment_column', str, 'treatment column'),
    ('--outcome-column', 'outcome_column', str, 'outcome column'),
    ('--true-effect-column', 'true_effect_column', str, 'ground-truth effect column'),
    ('--discrete-columns', 'discrete_columns', _str_list, 'comma-separated ordinal feature columns'),
    ('--criterion', 'criterion', str, 'ADAPTIVE, HONEST, LEARN, HONEST_LEARN or HONEST_VAL (or A, H, L, HL, HV)'),
    ('--lambda', 'lambda', float, 'cost term weight'),
    ('--validation-fraction', 'validation_fraction', float, 'rho'),
    ('--estimation-fraction', 'estimation_fraction', float, 'honest estimation share'),
    ('--test-fraction', 'test_fraction', float, 'held-out test share'),
    ('--max-trigger-candidates', 'max_trigger_candidates', int, 'trigger quantiles considered per node'),
    ('--honest-share', 'honest_share', str, 'node or global'),
    ('--cost-divisor', 'cost_divisor', str, 'split or node'),
    ('--min-group-size', 'min_group_size', int, 'training units per arm per child'),
    ('--min-heldout-size', 'min_heldout_size', int, 'validation/estimation units per arm per child'),
    ('--min-arm-share', 'min_arm_share', float, 'minimum arm share per trigger candidate'),
    ('--max-depth', 'max_depth', int, 'maximum depth'),
    ('--min-split-gain', 'min_split_gain', float, 'required score improvement'),
    ('--alpha', 'alpha', float, 'significance level'),
    ('--seed', 'seed', int, 'single seed of the run'),
    ('--folds', 'folds', int, 'cross-validation folds'),
    ('--lambda-grid', 'lambda_grid', _float_list, 'comma-separated lambda values'),
    ('--rho-grid', 'rho_grid', _float_list, 'comma-separated validation fractions'),
    ('--cores', 'cores', int, 'worker processes for tune'),
    ('--tree-file', 'tree_file', str, 'tree file'),
    ('--summary-file', 'summary_file', str, 'training summary file'),
    ('--report-file', 'report_file', str, 'evaluation report'),
    ('--predictions-file', 'predictions_file', str, 'predictions CSV'),
    ('--dot-file', 'dot_file', str, 'DOT output (default standard output)'),
    ('--output', 'generated_data_file', str, 'CSV written by generate'),
    ('--tune-table-file', 'tune_table_file', str, 'tune score table'),
    ('--tuned-config-file', 'tuned_config_file', str, 'configuration copy with the tuned values'),
    ('--compare-table-file', 'compare_table_file', str, 'compare table'),
]


def build_parser():
    parser = argparse.ArgumentParser(prog='trigtree', description='Trigger-based causal trees',
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('--config', help='YAML run configuration')
    parser.add_argument('--verbose', '-v', action='store_true', help='debug logging')
    parser.add_argument('--log-file', help='also log to this file')

    common = argparse.ArgumentParser(add_help=False)
    for flag, key, kind, text in CONFIG_FLAGS:
        common.add_argument(flag, dest=key, type=kind, default=None, help=text)

    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('generate', parents=[common], help='draw a synthetic dataset to CSV')
    subparsers.add_parser('train', parents=[common], help='grow a tree and write the tree file and summary')
    prune_parser = subparsers.add_parser('prune', parents=[common], help='significance-prune a tree file')
    prune_parser.add_argument('--pruned-tree-file', help='output tree file (default <tree>.pruned.yaml)')
    subparsers.add_parser('predict', parents=[common], help='per-row effect, trigger and prescription')
    evaluate_parser = subparsers.add_parser('evaluate', parents=[common], help='metrics report of a tree')
    evaluate_parser.add_argument('--on', choices=['test', 'train', 'all'], default='test',
                                 help='units to evaluate on (test needs test_fraction > 0)')
    subparsers.add_parser('tune', parents=[common], help='cross-validate lambda and rho')
    subparsers.add_parser('export-dot', parents=[common], help='Graphviz DOT of a tree file')
    subparsers.add_parser('compare', parents=[common], help='every criterion on one split, with pruned variants')
    return parser


_handlers = []


def setup_logging(verbose=False, log_file=None):
    # handlers from an earlier call in the same process are replaced
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    while _handlers:
        handler = _handlers.pop()
        root.removeHandler(handler)
        handler.close()

    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    _handlers.append(stream)
    if log_file:
        file_handler = logging.FileHandler(log_file, 'w+')
        file_handler.setFormatter(logging.Formatter('%(asctime)s: %(message)s'))
        _handlers.append(file_handler)
    for handler in _handlers:
        root.addHandler(handler)


def resolve_config(args):
    '''
    Validated run configuration: the file given by --config (if any) with
    every option given on the command line on top.

    Returns:
    --------
    config: dict
    explicit: set of keys set by the user (file or command line)
    '''
    explicit = set()
    if args.config:
        config = load_trigtree_yaml(args.config)
        explicit |= set((load_yaml(args.config) or {}).keys())
    else:
        config = validate_config({})

    for _, key, _, _ in CONFIG_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
            explicit.add(key)
    return validate_config(config), explicit


def _split(config, data):
    return split_dataset(data, validation_fraction=config['validation_fraction'],
                         estimation_fraction=config['estimation_fraction'],
                         test_fraction=config['test_fraction'], seed=config['seed'])


def _read_tree(config):
    tree, meta = read_tree(config['tree_file'])
    return tree, meta


def _criterion_from_meta(meta, config):
    if meta.get('criterion'):
        return CriterionConfig.from_dict(meta['criterion'])
    return config_to_objs(config).criterion


def _check_compatible(meta, data):
    if meta.get('dimension') is not None and meta['dimension'] != data.dimension:
        raise InputValidationError('trigtree.toolbox.cli: tree expects {} features, data has {}'.format(
            meta['dimension'], data.dimension))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_generate(config, args=None, explicit=()):
    data = load_run_data(dict(config, data_path=None))
    write_dataset_csv(data, config['generated_data_file'], config['treatment_column'], config['outcome_column'],
                      config['true_effect_column'] or 'true_effect')
    logger.info('Wrote {} synthetic units to {}'.format(len(data), config['generated_data_file']))
    return data


def cmd_train(config, args=None, explicit=()):
    learner_config = config_to_objs(config)
    data = load_run_data(config)
    split = _split(config, data)
    tree = train(split, learner_config)

    write_tree(tree, config['tree_file'], data.feature_names, data.feature_kinds, learner_config.criterion)
    summary_file = config['summary_file'] or os.path.splitext(config['tree_file'])[0] + '.summary.txt'
    write_summary(tree, summary_file, learner_config.criterion, data.feature_names)
    logger.info('Wrote tree to {} and summary to {}'.format(config['tree_file'], summary_file))
    return tree


def cmd_prune(config, args=None, explicit=()):
    tree, meta = _read_tree(config)
    data = load_run_data(config)
    _check_compatible(meta, data)
    criterion = _criterion_from_meta(meta, config)
    pruned = prune(tree, _split(config, data), config['alpha'], criterion.kind)

    out = getattr(args, 'pruned_tree_file', None) or os.path.splitext(config['tree_file'])[0] + '.pruned.yaml'
    write_tree(pruned, out, meta.get('feature_names'), meta.get('feature_kinds'), criterion)
    logger.info('Wrote pruned tree to {}'.format(out))
    return pruned


def cmd_predict(config, args=None, explicit=()):
    tree, meta = _read_tree(config)
    if config['data_path']:
        X = load_feature_matrix(config['data_path'], meta.get('feature_names'))
    else:
        X = load_run_data(config).features
    if meta.get('dimension') is not None and X.shape[1] != meta['dimension']:
        raise InputValidationError('trigtree.toolbox.cli: tree expects {} features, data has {}'.format(
            meta['dimension'], X.shape[1]))

    ace, trigger = predict_batch(tree, X)
    prescribed = np.where(ace > 0, trigger, np.nan)
    write_predictions(config['predictions_file'], ace, trigger, prescribed)
    logger.info('Wrote {} predictions to {}'.format(len(ace), config['predictions_file']))
    return ace, trigger


def _evaluation_data(split, data, on):
    if on == 'train':
        return split.train
    if on == 'all':
        return data
    if split.test is None:
        raise InputValidationError('trigtree.toolbox.cli: evaluating on test units needs a test part '
                                   '(test_fraction > 0); evaluate --on all uses every unit')
    return split.test


def cmd_evaluate(config, args=None, explicit=()):
    tree, meta = _read_tree(config)
    data = load_run_data(config)
    _check_compatible(meta, data)
    split = _split(config, data)
    on = getattr(args, 'on', 'test') or 'test'
    test = _evaluation_data(split, data, on)

    report = evaluate_tree(tree, test)
    alpha, pruned_report = None, None
    if 'alpha' in explicit:
        alpha = config['alpha']
        annotated = annotate_p_values(tree, split, _criterion_from_meta(meta, config).kind)
        try:
            pruned_report = evaluate_tree(annotated, test, significant_leaves(annotated, alpha))
        except EmptyData as e:
            logger.warning('No pruned metrics at alpha={}: {}'.format(alpha, e))
    write_report(report, config['report_file'], alpha=alpha, pruned=pruned_report, config=config)
    logger.info('ace_error = {:.6g}; wrote report to {}'.format(report.ace_error, config['report_file']))
    return report, pruned_report


def cmd_tune(config, args=None, explicit=()):
    data = load_run_data(config)
    result = tune(data, config_to_objs(config), config['lambda_grid'], config['rho_grid'], folds=config['folds'],
                  seed=config['seed'], estimation_fraction=config['estimation_fraction'], cores=config['cores'])
    result.table.to_csv(config['tune_table_file'], index=False)
    logger.info('Wrote tune table to {}'.format(config['tune_table_file']))

    if config['tuned_config_file']:
        updates = {'lambda': result.best_lambda, 'validation_fraction': result.best_rho}
        config_file = getattr(args, 'config', None)
        if config_file:
            update_yaml(config_file, updates, config['tuned_config_file'])
        else:
            tuned = {key: config[key] for key in explicit}
            tuned.update(updates)
            save_yaml(os.path.dirname(config['tuned_config_file']), os.path.basename(config['tuned_config_file']), tuned)
        logger.info('Wrote tuned configuration to {}'.format(config['tuned_config_file']))
    print('best lambda = {}, best rho = {}'.format(result.best_lambda, result.best_rho))
    return result


def cmd_export_dot(config, args=None, explicit=()):
    tree, meta = _read_tree(config)
    dot = export_dot(tree, meta.get('feature_names'), meta.get('feature_kinds'))
    if config['dot_file']:
        with open(config['dot_file'], 'w') as f:
            f.write(dot)
        logger.info('Wrote DOT to {}'.format(config['dot_file']))
    else:
        sys.stdout.write(dot)
    return dot


def cmd_compare(config, args=None, explicit=()):
    base = config_to_objs(config)
    data = load_run_data(config)
    split = _split(config, data)
    test = _evaluation_data(split, data, 'test')

    rows = []
    for kind in CriterionKind:
        learner_config = replace(base, criterion=replace(base.criterion, kind=kind))
        tree = train(split, learner_config)
        annotated = annotate_p_values(tree, split, kind)
        variants = [(kind.label, None), (kind.label + 'P', significant_leaves(annotated, config['alpha']))]
        for label, selected in variants:
            try:
                report = evaluate_tree(annotated, test, selected)
            except EmptyData as e:
                logger.warning('{}: {}'.format(label, e))
                rows.append({'method': label})
                continue
            rows.append(dict(method=label, **report.to_dict()))

    table = pd.DataFrame(rows)
    table.to_csv(config['compare_table_file'], index=False)
    logger.info('Wrote comparison of {} methods to {}'.format(len(rows), config['compare_table_file']))
    return table


COMMANDS = {
    'generate': cmd_generate,
    'train': cmd_train,
    'prune': cmd_prune,
    'predict': cmd_predict,
    'evaluate': cmd_evaluate,
    'tune': cmd_tune,
    'export-dot': cmd_export_dot,
    'compare': cmd_compare,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.log_file)
    try:
        config, explicit = resolve_config(args)
        COMMANDS[args.command](config, args, explicit)
    except InputValidationError as e:
        logger.error(str(e))
        return 2
    except Exception as e:
        logger.debug('Traceback of the failure:', exc_info=True)
        logger.error('{}: {}'.format(type(e).__name__, e))
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
