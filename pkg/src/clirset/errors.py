"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2.
"""


class ClirsetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ClirsetError):
    """Bad usage or configuration: missing inputs, contradictory flags."""


class DataError(ClirsetError):
    """Malformed input data or a violated structural invariant."""


class UnsupportedQueryError(ClirsetError):
    """A query kind the retrieval pipeline does not handle (non-lexical)."""
