"""Exception types shared across the package."""


class GFieldLabError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(GFieldLabError):
    """Invalid run configuration (bad value, unknown key, broken invariant).

    The CLI maps this to exit code 2.
    """


class SpaceMismatchError(GFieldLabError, ValueError):
    """Operands live on different measure spaces or grids."""


class CheckFailure(GFieldLabError):
    """A verification check failed (CLI exit code 1)."""
