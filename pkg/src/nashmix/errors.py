"""Exception hierarchy shared by every module.

The CLI maps these classes onto distinct exit codes, so library code should
raise the most specific subclass that applies.
"""


class NashmixError(Exception):
    """Base class for all toolkit errors."""


class InputError(NashmixError, ValueError):
    """Malformed game, strategy, or program description."""


class SolverError(NashmixError, RuntimeError):
    """A numerical routine failed (cycling, singular basis, ...)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SearchError(SolverError):
    """A search phase could not produce strategies meeting its contract."""
