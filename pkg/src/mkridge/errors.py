"""Exception types shared across the package."""


class ConfigError(Exception):
    """A run configuration is malformed or inconsistent."""


class DataError(Exception):
    """Input data cannot be parsed or violates a data contract."""


class NumericalError(Exception):
    """A numerical routine failed (e.g. an indefinite kernel system)."""
