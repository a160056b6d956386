"""Polymerization / fragmentation model of prion proliferation.

Submodules: ``model`` (parameters, equilibria, grids, densities), ``ode``
(moment system), ``pide`` (upwind marching of the full system),
``characteristics`` (exact transport and the Picard construction),
``spectral`` (constant-speed operator calculus), and ``config`` /
``runner`` / ``verify`` / ``cli`` for scenario files and the check suite.
"""

from .errors import (CflViolation, ConeViolation, NegativeDensity, NoiseDominated, NotConverged,
                     NotDiseaseCase, OutOfBoundaryRegion, ParseError, PrionModelError,
                     SubcriticalParameters, ToleranceNotMet, ValidationError)
from .model import (DISEASE, DISEASE_FREE, ORIGINAL, SHIFTED, Density, Grid, OdeState, Params,
                    Threshold, derive_constants, disease_equilibrium_ode, disease_free_equilibrium,
                    phi, stationary_density, threshold_classify, weighted_norm)

__version__ = "0.1.0"

__all__ = [
    "CflViolation", "ConeViolation", "NegativeDensity", "NoiseDominated", "NotConverged",
    "NotDiseaseCase", "OutOfBoundaryRegion", "ParseError", "PrionModelError",
    "SubcriticalParameters", "ToleranceNotMet", "ValidationError",
    "DISEASE", "DISEASE_FREE", "ORIGINAL", "SHIFTED", "Density", "Grid", "OdeState", "Params",
    "Threshold", "derive_constants", "disease_equilibrium_ode", "disease_free_equilibrium", "phi",
    "stationary_density", "threshold_classify", "weighted_norm",
]
