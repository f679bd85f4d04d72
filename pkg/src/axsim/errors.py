"""Shared error types."""


class ConfigError(ValueError):
    """A user-facing configuration problem (bad key, bad value, missing spec)."""


class SimFault(RuntimeError):
    """An internal invariant was violated while simulating."""
