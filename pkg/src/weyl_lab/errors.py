"""Exception hierarchy shared by the core modules, the service and the CLI.

Three categories matter downstream: configuration problems (bad files, bad
parameters), hypothesis failures (a precondition of the theory is not met, so
the requested quantity would be meaningless) and numerical failures (the
computation itself did not certify).  The service maps them to HTTP statuses
and the CLI to exit codes.
"""

from __future__ import annotations


class WeylLabError(Exception):
    """Base class for everything raised deliberately by this package."""

    category = "numerical"


class ConfigError(WeylLabError):
    """Malformed or inconsistent input: missing file, bad JSON, bad parameter."""

    category = "config"


class HypothesisError(WeylLabError):
    """A mathematical precondition fails; the requested output is undefined."""

    category = "hypothesis"


class InvalidModelError(HypothesisError):
    """A symbol or perturbation model violates one of its structural invariants."""


class TrustedRadiusError(HypothesisError):
    """A count was requested outside the certified spectral window."""


class NumericalError(WeylLabError):
    """The computation ran but failed to certify its tolerance."""

    category = "numerical"


class QuadratureError(NumericalError):
    """Adaptive quadrature did not meet its tolerance at maximal subdivision."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class EigensolveError(NumericalError):
    """The dense eigensolver failed to converge or certify residuals."""
