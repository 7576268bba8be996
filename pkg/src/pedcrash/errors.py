"""Exception hierarchy.

The CLI maps each family to an exit code: input problems exit 2,
configuration problems exit 3, model/internal failures exit 4.
"""


class PedcrashError(Exception):
    exit_code = 4


class InputError(PedcrashError):
    """Bad input data: malformed CSV, unknown levels, too few rows."""

    exit_code = 2


class SchemaError(InputError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ValidationError(InputError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class StratificationError(InputError):
    def __init__(self, message, category=None):
        super().__init__(message)
        self.category = category


class ResampleError(InputError):
    def __init__(self, message, category=None):
        super().__init__(message)
        self.category = category


class ConfigError(PedcrashError):
    exit_code = 3


class ModelError(PedcrashError):
    exit_code = 4


class ExplainError(PedcrashError):
    exit_code = 4


class RenderError(PedcrashError):
    exit_code = 4


class OutputError(PedcrashError):
    """Writing an artifact failed; the message carries the path."""

    exit_code = 4
