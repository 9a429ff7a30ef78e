"""Exception types shared across the package."""


class NfsecError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NfsecError):
    """Invalid user input: geometry, config file, or CLI arguments."""


class NumericalError(NfsecError):
    """A linear-algebra step failed or produced non-finite values.

    Carries a short diagnostic string (what was being factored/solved and
    the observed conditioning or defect) so harness logs stay useful.
    """

    def __init__(self, message: str, diagnostic: str = ""):
        super().__init__(message if not diagnostic else f"{message} [{diagnostic}]")
        self.diagnostic = diagnostic


class TrialFailureError(NfsecError):
    """Raised when more than the tolerated share of Monte Carlo trials fail."""
