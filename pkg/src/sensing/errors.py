"""Exceptions raised by the sensing library.

Solver non-convergence and rank-deficient certificates are reported as data in
the result objects, so they never appear here.
"""


class SensingError(Exception):
    """Base class for every error raised by the sensing library."""


class InvalidDimensionError(SensingError, ValueError):
    """A vector or operator has a length the operation cannot accept."""


class ConfigurationError(SensingError, ValueError):
    """A parameter, distribution or mode is unsupported or out of range."""


class ResourceLimitError(SensingError):
    """A dense path was requested above its size ceiling."""


class RealnessError(SensingError, ArithmeticError):
    """A quantity that must be real carried a non-negligible imaginary part."""
