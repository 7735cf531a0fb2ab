"""Divergence-free beam transforms on the ball.

Submodules
----------
special_fn   spherical Bessel functions, zeros, spherical harmonics
wigner       3j / 6j symbols and Clebsch-Gordan coefficients
basis        the toroidal beam basis and finite-difference checks
transform    quadrature grids, forward/inverse transforms, Parseval
cohomology   the Wigner-weighted spectral coboundary
dynamics     coupling tensor and Galerkin time integration
entropy      shell spectra, maximum-entropy profiles, decay fits
io, cli      file formats and the ``dfrt`` command
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DFRTError,
    DimensionError,
    DomainError,
    FeasibilityError,
    InsufficientDataError,
    ModeIndexError,
    NormalizationError,
    NumericalFailure,
    UnsupportedOrderError,
)

__all__ = [
    "__version__",
    "DFRTError",
    "ConfigurationError",
    "ModeIndexError",
    "UnsupportedOrderError",
    "DomainError",
    "DimensionError",
    "FeasibilityError",
    "InsufficientDataError",
    "NormalizationError",
    "NumericalFailure",
]
