"""
Metric Catalog Package

Every integrable model of the lab, addressable by string key.

Components:
- classical: flat torus, round sphere, surfaces of revolution, Liouville surfaces
- quadrics: ellipsoid with Moser integrals, Chasles tangency, projective companion
- sphere_metrics: Neumann/Maupertuis, Brailov/Manakov, rigid body metrics
- sol: torus bundles with hyperbolic (SOL) or parabolic (NIL) monodromy
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..errors import GeodesicLabError, ParameterError
from ..geometry_core import GeodesicModel
from .classical import flat_torus, liouville_from_params, liouville_surface, revolution_from_profile, round_sphere, surface_of_revolution
from .quadrics import EllipsoidParams, ProjectiveFamily, chasles_tangency, ellipsoid_moser, projective_family
from .sol import SolModel, sol_data, sol_manifold
from .sphere_metrics import (
    brailov_manakov_sphere,
    maupertuis_metric,
    matched_neumann_momenta,
    neumann_maupertuis,
    rigid_body_maupertuis,
    sphere_metric_sp1,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CatalogEntry:
    key: str
    builder: Callable[..., GeodesicModel]
    defaults: Dict[str, Any]
    anchor: str
    summary: str
    checks: Tuple[str, ...] = ("conservation", "commutation", "identities")
    commuting_set: Optional[str] = None


def _ellipsoid(a):
    return ellipsoid_moser(EllipsoidParams(tuple(a)))


def _projective(a):
    return projective_family(EllipsoidParams(tuple(a)))


def _brailov(a, b, deformed):
    return brailov_manakov_sphere(a, b, deformed=deformed)


CATALOG: Tuple[CatalogEntry, ...] = (
    CatalogEntry("flat_torus", flat_torus, {"a": 1.0, "b": 0.0, "c": 1.0},
                 "§2", "flat torus: commuting linear momenta", commuting_set="momenta"),
    CatalogEntry("sphere", round_sphere, {},
                 "§2", "round sphere: vector integral F = [x, xdot], non-commutative integrability",
                 ("conservation", "constraint", "identities", "completeness"), commuting_set="axis3"),
    CatalogEntry("revolution", revolution_from_profile, {"profile": "torus", "R": 2.0, "r": 1.0},
                 "§2 Theorem 2", "Clairaut: surfaces of revolution, integral r cos psi", commuting_set="clairaut"),
    CatalogEntry("liouville", liouville_from_params,
                 {"f_kind": "cosine", "f_c0": 1.0, "f_c1": 0.5, "g_kind": "constant", "g_c0": 1.0, "g_c1": 0.0},
                 "§2 Eqs. (2)-(3)", "Liouville metric (f(x1) + g(x2))(dx1^2 + dx2^2) with a quadratic integral",
                 commuting_set="liouville"),
    CatalogEntry("ellipsoid", _ellipsoid, {"a": [3.0, 2.0, 1.0]},
                 "§2 Theorem 4", "Moser integrals of geodesics on the ellipsoid; Chasles confocal tangency",
                 ("conservation", "constraint", "commutation", "identities", "chasles"), commuting_set="moser"),
    CatalogEntry("neumann", neumann_maupertuis, {"A": [1.5, 1.0, 0.5], "h": 2.0},
                 "§9", "Neumann system, Uhlenbeck integrals and the Maupertuis metric (h - V) ds^2",
                 ("conservation", "constraint", "commutation", "identities"), commuting_set="uhlenbeck"),
    CatalogEntry("brailov", _brailov,
                 {"a": [4.0, 3.0, 2.0, 1.0], "b": [-0.25, -1.0 / 3.0, -0.5, 0.0], "deformed": False},
                 "§9", "Brailov/Manakov metrics on the sphere via so(n) and so(n, 1)",
                 ("conservation", "constraint", "commutation", "identities"), commuting_set="manakov"),
    CatalogEntry("projective", _projective, {"a": [3.0, 2.0, 1.0]},
                 "§9", "projectively equivalent ellipsoid metrics and the operator S = (A - x x^T)|Q",
                 ("conservation", "constraint", "identities"), commuting_set="moser"),
    CatalogEntry("kovalevskaya", lambda h: rigid_body_maupertuis("kovalevskaya", h), {"h": 2.0},
                 "§9", "Kovalevskaya top: Maupertuis metric on the Poisson sphere, A = diag(1, 1, 2)",
                 ("conservation", "constraint")),
    CatalogEntry("goryachev_chaplygin", lambda h: rigid_body_maupertuis("goryachev_chaplygin", h), {"h": 2.0},
                 "§9", "Goryachev-Chaplygin top: Maupertuis metric on the Poisson sphere, A = diag(1, 1, 4)",
                 ("conservation", "constraint")),
    CatalogEntry("sol", lambda B: sol_manifold(B, key="sol"), {"B": [[2, 1], [1, 1]]},
                 "§4 Theorem 9", "SOL torus bundle with hyperbolic monodromy: integrable flow of positive entropy",
                 ("conservation", "commutation", "identities", "return_map"), commuting_set="sol"),
    CatalogEntry("nil", lambda B: sol_manifold(B, key="nil"), {"B": [[1, 1], [0, 1]]},
                 "§4 Theorem 9", "NIL torus bundle with parabolic monodromy",
                 ("conservation", "commutation", "identities", "return_map"), commuting_set="sol"),
)

_BY_KEY = {entry.key: entry for entry in CATALOG}


def catalog_entry(key: str) -> CatalogEntry:
    try:
        return _BY_KEY[key]
    except KeyError:
        raise ParameterError(f"unknown model key {key!r}; known: {', '.join(_BY_KEY)}", "model") from None


def build_model(key: str, parameters: Optional[Dict[str, Any]] = None) -> GeodesicModel:
    """
    Construct a catalog model from its key and a (partial) parameter block.

    Raises:
        ParameterError: unknown key, unknown parameter, or invalid value
    """
    entry = catalog_entry(key)
    params = dict(entry.defaults)
    for name, value in (parameters or {}).items():
        if name not in entry.defaults:
            raise ParameterError(f"model {key!r} takes no parameter {name!r}", name)
        params[name] = value
    logger.debug("building %s with %s", key, params)
    try:
        return entry.builder(**params)
    except GeodesicLabError:
        raise
    except (TypeError, ValueError) as e:
        raise ParameterError(f"invalid parameters for {key!r}: {e}", key) from e


def list_catalog() -> List[Dict[str, Any]]:
    """Stable-ordered listing: key, default parameters, declared integrals, section anchor, summary, default checks."""
    listing = []
    for entry in CATALOG:
        model = entry.builder(**entry.defaults)
        listing.append({
            "key": entry.key,
            "name": model.name,
            "parameters": dict(entry.defaults),
            "integrals": [f.name for f in model.integrals],
            "anchor": entry.anchor,
            "summary": entry.summary,
            "checks": list(entry.checks),
        })
    return listing


__all__ = [
    "CATALOG",
    "CatalogEntry",
    "EllipsoidParams",
    "ProjectiveFamily",
    "SolModel",
    "brailov_manakov_sphere",
    "build_model",
    "catalog_entry",
    "chasles_tangency",
    "ellipsoid_moser",
    "flat_torus",
    "list_catalog",
    "liouville_surface",
    "matched_neumann_momenta",
    "maupertuis_metric",
    "neumann_maupertuis",
    "projective_family",
    "rigid_body_maupertuis",
    "round_sphere",
    "sol_data",
    "sol_manifold",
    "sphere_metric_sp1",
    "surface_of_revolution",
]
