"""Numerical laboratory for random perturbations of non-uniformly expanding maps."""
from .domains import PhaseDomain
from .errors import StochStabError
from .kernels import BACKEND
from .systems import CATALOG, MapSystem, SmoothnessConstants, build_system

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CATALOG",
    "MapSystem",
    "PhaseDomain",
    "SmoothnessConstants",
    "StochStabError",
    "build_system",
]
