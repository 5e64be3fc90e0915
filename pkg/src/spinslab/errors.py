"""Exception hierarchy used across the package."""


class SpinslabError(Exception):
    """Base class for all package errors."""


class NormalizationError(SpinslabError):
    """A direction or axis input is not unit-normalized."""


class DomainError(SpinslabError):
    """An input lies outside the physical domain of an operation."""


class ConfigurationError(SpinslabError):
    """Invalid configuration or parameter combination."""


class NumericalError(SpinslabError):
    """A numerical routine failed to reach the requested tolerance."""


class ResolutionError(SpinslabError):
    """A grid is too coarse for the requested operation."""


class FitError(SpinslabError):
    """A least-squares fit failed or had insufficient data."""


class AnalysisError(SpinslabError):
    """An analysis step could not produce a well-defined result."""


class ParseError(SpinslabError):
    """Malformed input data."""


class ConversionError(SpinslabError):
    """Unsupported unit conversion."""


class InputError(SpinslabError):
    """Structurally invalid input to an operation."""
