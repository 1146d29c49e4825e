"""Density deconvolution by spectral cut-off, with known or estimated error density."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import ConfigError, DataError, NumericalError
from .spectral import FrequencyGrid, SobolevWeight, SpectralFunction, make_grid, default_grid
from .models import parse_model, convolve
from .estimators import ecf, kde_spectrum, deconv_known, deconv_unknown, regularized_target
from .regularization import ThresholdRule, threshold, rho_compute, bias_bound_audit

__all__ = [
    "BACKEND", "ConfigError", "DataError", "NumericalError", "FrequencyGrid", "SobolevWeight",
    "SpectralFunction", "make_grid", "default_grid", "parse_model", "convolve", "ecf",
    "kde_spectrum", "deconv_known", "deconv_unknown", "regularized_target", "ThresholdRule",
    "threshold", "rho_compute", "bias_bound_audit",
]
