"""Exception hierarchy shared by every module."""


class ChainError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ChainError, ValueError):
    """Invalid construction parameters or missing inputs."""


class DomainError(ChainError, ValueError):
    """An operation was applied outside its domain (wrong axes, grids, sets)."""


class StepSizeError(ChainError, RuntimeError):
    """A transport step would move data further than the displacement guard allows."""


class UndefinedEntropyError(ChainError, ValueError):
    """The H-function cannot be formed because the total measure vanishes."""


class DumpFormatError(ChainError, ValueError):
    """A grid dump file is malformed or truncated."""
