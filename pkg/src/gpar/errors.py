"""Error types shared across the package.

ConfigError maps to exit code 1 in the CLI, DataError (and its
subclasses) to exit code 2.
"""


class ConfigError(Exception):
    """Invalid run configuration (bad flag value, inconsistent options)."""


class DataError(Exception):
    """Problem with input data (files, vocabularies, formats)."""


class ParseError(DataError):
    """Malformed text input; message carries file/line or position info."""
