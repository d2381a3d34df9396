# Copyright 2024 trigtree developers

# Licensed under the Apache License, Version 2.0 (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy of the
# License at http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software distributed
# under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
# CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Exceptions raised by the trigtree toolbox.

Anything deriving from InputValidationError is a problem with user input
(data, configuration or files) and maps to exit code 2 on the command line.
"""


class DegenerateGroup(Exception):
    """A treated or control group is empty or too small for the requested statistic."""
    pass


class InputValidationError(ValueError):
    pass


class EmptyData(InputValidationError):
    pass


class NoVariation(InputValidationError):
    pass


class ConfigError(InputValidationError):
    pass


class WrongFormatError(InputValidationError):
    pass


class CSVSchemaError(InputValidationError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append('row {}'.format(row))
        if column is not None:
            location.append('column "{}"'.format(column))
        if location:
            message = '{} ({})'.format(message, ', '.join(location))
        super().__init__(message)
