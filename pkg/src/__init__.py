"""
Geodesic Lab

A numerical laboratory for integrable geodesic flows: a catalog of
integrable metrics, structure-preserving integrators and machine checks of
first integrals, Poisson commutation, completeness and topological entropy.

CORE CHECKS:
- Conservation of declared first integrals along integrated geodesics
- Pairwise commutation under canonical, Dirac and Lie-Poisson brackets
- ddim/dind completeness of function families
- Return maps and spanning-set entropy of torus bundles
"""

__version__ = "0.1.0"
__author__ = "Geodesic Lab Team"
__email__ = "dev@example.com"

from .catalog import build_model, list_catalog
from .geometry_core import CotangentState, FirstIntegral, GeodesicModel
from .integrator import StepConfig, TrajectoryRecord, integrate

__all__ = [
    "CotangentState",
    "FirstIntegral",
    "GeodesicModel",
    "StepConfig",
    "TrajectoryRecord",
    "build_model",
    "integrate",
    "list_catalog",
]
