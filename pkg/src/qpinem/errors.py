"""Shared exception types.

ConfigError maps to CLI exit code 2 (bad parameters / validation),
NumericsError to exit code 3 (leakage, ill-posed inversion, overflow).
"""


class ConfigError(ValueError):
    pass


class NumericsError(RuntimeError):
    pass
