"""
Exception hierarchy for sle-lab

Domain errors (bad parameters, points outside the evaluation domain) and
numerical aborts (singular gaps, failed integrations) are kept apart so the
CLI can map them to distinct exit codes.
"""

from typing import Any, Dict, Optional


class SLEError(Exception):
    """Base class for every error raised by sle-lab"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = dict(details or {})

    def __str__(self) -> str:
        if not self.details:
            return self.message
        extra = ", ".join(f"{key}={value!r}" for key, value in sorted(self.details.items()))
        return f"{self.message} ({extra})"


class ConfigurationError(SLEError, ValueError):
    """Configuration file or environment failed validation"""


class DomainError(SLEError, ValueError):
    """Parameters or evaluation points outside the admissible domain"""


class NumericalError(SLEError, ArithmeticError):
    """A numerical scheme could not produce a trustworthy value"""


class SingularGap(NumericalError):
    """Marked boundary point collided with the driver"""


class PointSwallowed(NumericalError):
    """Forward-map trajectory reached the driver point"""


class NumericalBlowup(NumericalError):
    """Backward integration left the closed unit disc"""


class GapCollapse(NumericalError):
    """Driver/force-point gap left its open interval after all retries"""


class PathAbort(NumericalError):
    """A sampled path had to be abandoned"""


class MaxTimeExceeded(NumericalError):
    """Absorbed diffusion did not exit before the time cap"""


class StiffnessFailure(NumericalError):
    """Adaptive ODE integration stalled before reaching its end point"""


class OutOfGrid(NumericalError):
    """Evaluation point outside the stored interpolation grid"""


class ParameterDegenerate(NumericalError):
    """Closed form undefined for integer hypergeometric parameter"""


class Divergent(NumericalError):
    """Requested moment is infinite"""


class SeriesNonConvergent(NumericalError):
    """Power series did not converge within the term budget"""


class StencilOutOfDomain(NumericalError):
    """Finite-difference stencil reaches outside the domain"""


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DOMAIN = 2
EXIT_NUMERICAL = 3
EXIT_INTERRUPTED = 130


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code"""
    if isinstance(error, KeyboardInterrupt):
        return EXIT_INTERRUPTED
    if isinstance(error, (DomainError, ConfigurationError)):
        return EXIT_DOMAIN
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_FAILURE
