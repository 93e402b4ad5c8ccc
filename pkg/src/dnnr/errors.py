"""Exception hierarchy shared across the package.

ConfigError maps to CLI exit code 1, DataError to exit code 2.
"""


class DnnrError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DnnrError):
    """Invalid configuration: bad hyperparameters, unknown method, malformed grid."""


class DataError(DnnrError):
    """Invalid data: unreadable files, unparseable cells, degenerate datasets."""
