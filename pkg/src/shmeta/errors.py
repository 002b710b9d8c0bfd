"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to, so the orchestrator can
translate failures without a lookup table.
"""


class ShmetaError(Exception):
    exit_code = 3


class ArgumentError(ShmetaError, ValueError):
    """Invalid argument or configuration value."""

    exit_code = 2


class DomainError(ArgumentError):
    """Parameter outside the range where a quantity is defined."""


class DegenerateFieldError(ShmetaError):
    pass


class StepFailure(ShmetaError):
    """A time step could not be completed.

    ``last_iterate`` holds the field samples reached before giving up and
    ``time`` the flow time of the failing step (filled in by ``evolve``).
    """

    def __init__(self, message, last_iterate=None, time=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.time = time


class StepSizeError(StepFailure):
    pass


class ConvergenceError(ShmetaError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ResolutionError(ShmetaError):
    pass


class ComplianceError(ShmetaError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BudgetExceeded(ShmetaError):
    exit_code = 4
