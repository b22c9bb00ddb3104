"""Error categories mapped to CLI exit codes (config -> 2, data -> 3)."""


class ConfigError(Exception):
    """Misconfiguration: bad flags, inconsistent options, invalid values."""


class DataError(Exception):
    """Unreadable or malformed input data."""
