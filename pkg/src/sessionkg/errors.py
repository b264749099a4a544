"""Exception types shared across the package."""


class SessionKGError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SessionKGError):
    """Malformed or inconsistent input data (session files, catalogs, graphs)."""


class ConfigError(SessionKGError):
    """Invalid configuration value, unknown key, or violated precondition."""


class ShapeError(SessionKGError):
    """Tensor operands are shape-incompatible for the requested primitive."""


class VocabularyMismatchError(DataError):
    """Model, graph, and corpus disagree on the item vocabulary."""
