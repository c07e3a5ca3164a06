# =============================================================================
# errors.py - V1.3.0
# Module: exception hierarchy shared by every layer
# Notes:
#   - [Add] CLI maps each class to an exit status (1 = data, 2 = usage)
# =============================================================================


class GpiError(Exception):
    """Base class for all errors raised by the poverty decomposition toolkit."""

    exit_code = 1


class SurveyFormatError(GpiError):
    """Malformed survey input (missing column, bad record, empty stratum)."""


class DomainError(GpiError, ValueError):
    """Argument outside its mathematical domain."""

    exit_code = 2


class ParameterError(GpiError, ValueError):
    """Unknown measure, bad measure parameter or malformed measure string."""

    exit_code = 2


class HypothesisError(GpiError):
    """A regularity hypothesis (headcount inside (0,1), positive H_c / H_pi) fails."""


class NoPoorError(GpiError):
    """No income at or below the poverty line anywhere: no inference possible."""


class NumericalError(GpiError):
    """Plug-in variance below the clamping tolerance."""


class ExperimentError(GpiError):
    """Invalid Monte Carlo experiment description."""


class UsageError(GpiError):
    """Bad command-line invocation."""

    exit_code = 2
