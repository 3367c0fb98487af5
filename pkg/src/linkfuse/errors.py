class DataError(ValueError):
    """Malformed or inconsistent input data (maps to CLI exit code 3)."""


class ConfigError(ValueError):
    """Invalid configuration or parameters (maps to CLI exit code 2)."""
