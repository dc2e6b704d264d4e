"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` (e.g. ``"behind-camera"``)
so callers and tests can branch on the failure kind without parsing messages.
"""


class BiAdaptError(Exception):
    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class ConfigError(BiAdaptError):
    """Bad or inconsistent experiment configuration (CLI exit code 2)."""


class DataError(BiAdaptError):
    """Missing, malformed or degenerate data on disk or in memory (CLI exit code 3)."""


class NonFiniteError(BiAdaptError):
    def __init__(self, message: str = ""):
        super().__init__("nan-loss", message)
