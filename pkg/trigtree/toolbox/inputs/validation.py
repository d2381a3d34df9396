import copy
import os

import jsonschema

from trigtree.toolbox.errors import ConfigError
from trigtree.toolbox.util.FileTools import load_yaml

schema_dir = os.path.dirname(os.path.abspath(__file__))
schema_file = os.path.join(schema_dir, 'toolbox_schema.yaml')


def _extend_with_default(validator_class):
    # Validator that fills in schema defaults while it validates
    validate_properties = validator_class.VALIDATORS['properties']

    def set_defaults(validator, properties, instance, schema):
        if isinstance(instance, dict):
            for prop, subschema in properties.items():
                if 'default' in subschema:
                    instance.setdefault(prop, copy.deepcopy(subschema['default']))

        for error in validate_properties(validator, properties, instance, schema):
            yield error

    return jsonschema.validators.extend(validator_class, {'properties': set_defaults})


DefaultValidatingValidator = _extend_with_default(jsonschema.Draft7Validator)


def load_schema():
    return load_yaml(schema_file)


def schema_descriptions(schema=None):
    # description of every top-level input, used as comments in written files
    schema = load_schema() if schema is None else schema
    return {key: props['description'] for key, props in schema['properties'].items() if 'description' in props}


def validate_config(config, defaults=True):
    '''
    Validate a run configuration dictionary against the toolbox schema.

    Parameters:
    -----------
    config: dict
    defaults: bool
        fill missing inputs with their schema defaults

    Returns:
    --------
    validated copy of config
    '''
    config = copy.deepcopy(config) if config is not None else {}
    if not isinstance(config, dict):
        raise ConfigError('trigtree.toolbox.inputs: the configuration must be a mapping of input names to values')

    schema = load_schema()
    validator = DefaultValidatingValidator(schema) if defaults else jsonschema.Draft7Validator(schema)
    error = jsonschema.exceptions.best_match(validator.iter_errors(config))
    if error is not None:
        where = '/'.join(str(p) for p in error.absolute_path) or '<root>'
        raise ConfigError('trigtree.toolbox.inputs: invalid input {}: {}'.format(where, error.message))

    if defaults:
        fractions = config['validation_fraction'] + config['estimation_fraction'] + config['test_fraction']
        if fractions >= 1.0:
            raise ConfigError('trigtree.toolbox.inputs: validation, estimation and test fractions sum to {} '
                              '(must be below 1)'.format(fractions))
    return config


def load_trigtree_yaml(finput):
    '''
    Load and validate a run configuration file, filling in defaults.
    A relative data_path is resolved against the file's directory.
    '''
    try:
        inps = load_yaml(finput)
    except OSError as e:
        raise ConfigError('trigtree.toolbox.inputs: cannot read {}: {}'.format(finput, e))
    except Exception as e:
        raise ConfigError('trigtree.toolbox.inputs: {} is not valid YAML: {}'.format(finput, e))

    config = validate_config(inps)
    if config['data_path'] and not os.path.isabs(config['data_path']):
        config['data_path'] = os.path.join(os.path.dirname(os.path.abspath(finput)), config['data_path'])
    return config
