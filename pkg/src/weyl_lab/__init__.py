"""Numerical laboratory for spectra of randomly perturbed elliptic operators on the circle.

The package computes spectra of non-self-adjoint differential operators
P = sum_k a_k(x) D^k on S^1, perturbed by random smooth potentials, and tests
the phase-space volume law that predicts how many eigenvalues land in a given
sector of the complex plane.
"""

__version__ = "0.1.0"

from .errors import (
    WeylLabError,
    ConfigError,
    HypothesisError,
    NumericalError,
    QuadratureError,
    TrustedRadiusError,
    InvalidModelError,
)

__all__ = [
    "WeylLabError",
    "ConfigError",
    "HypothesisError",
    "NumericalError",
    "QuadratureError",
    "TrustedRadiusError",
    "InvalidModelError",
    "__version__",
]
