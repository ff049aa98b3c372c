"""Exception types shared across the toolkit."""


class DrsimError(Exception):
    """Base class for all toolkit errors."""


class DomainError(DrsimError, ValueError):
    """An argument is outside the domain an operation is defined on."""


class InsufficientDataError(DomainError):
    """Too few samples to perform the requested fit or estimate."""


class DegenerateFitError(DomainError):
    """The fit system is singular (e.g. duplicate timestamps)."""


class NotInitializedError(DrsimError):
    """State was queried before any update was applied."""


class CoverageError(DrsimError):
    """No fuzzy rule fires for the given input (rule base does not cover it)."""


class ConfigError(DrsimError):
    """One or more problems in a scenario config document.

    `issues` is a list of human-readable strings, each naming the line
    (when known), section and key the problem was found at.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))
