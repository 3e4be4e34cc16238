"""
Exception hierarchy for the solver and its CLI
"""

from typing import Optional


class HodgError(Exception):
    """Base class for all solver errors"""

    exit_code: int = 1


class ConfigurationError(HodgError, ValueError):
    """Invalid input: bad degree, flux string, config file, problem id..."""

    exit_code = 2


class DegreeTooLowError(ConfigurationError):
    """Polynomial degree below what a scheme or projection needs"""

    def __init__(self, what: str, k: int, minimum: int):
        self.k = k
        self.minimum = minimum
        super().__init__(f"{what} requires k >= {minimum} (got k={k})")


class AmbiguousTraceError(ConfigurationError):
    """Point evaluation requested exactly on a cell boundary without a side"""


class NumericalFailure(HodgError, RuntimeError):
    """A computation ran but produced an unusable result"""

    exit_code = 1


class SingularSystemError(NumericalFailure):
    """A local projection system could not be factored"""


class IntegrationAborted(NumericalFailure):
    """Time integration stopped early (NaN or Newton non-convergence)"""

    def __init__(self, reason: str, step: int, time: float):
        self.reason = reason
        self.step = step
        self.time = time
        super().__init__(f"{reason} at step {step} (t={time:.6g})")


class StudyFailed(NumericalFailure):
    """A convergence study level failed; carries the mesh size"""

    def __init__(self, n_cells: int, cause: Exception):
        self.n_cells = n_cells
        self.cause = cause
        super().__init__(f"N={n_cells}: {cause}")


def exit_code_for(exc: Optional[BaseException]) -> int:
    """Map an exception to the CLI exit code (0 pass, 1 numerical, 2 config)"""
    if exc is None:
        return 0
    if isinstance(exc, HodgError):
        return exc.exit_code
    if isinstance(exc, ValueError):
        return 2
    return 1
