"""
Classical integrable geodesic flows.

Flat torus, round sphere with its vector integral, surfaces of revolution
(Clairaut) and Liouville surfaces.
"""

import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .. import autodiff as ad
from ..errors import ParameterError
from ..geometry_core import (
    ChartMetric,
    CoordinateSpec,
    CotangentState,
    EmbeddedMetric,
    FirstIntegral,
    GeodesicModel,
)

logger = logging.getLogger(__name__)

ProfileFn = Callable[[object], object]


def flat_torus(a: float = 1.0, b: float = 0.0, c: float = 1.0) -> GeodesicModel:
    """
    Flat torus with H = 1/2 (a p1^2 + 2 b p1 p2 + c p2^2).

    Args:
        a, b, c: entries of the (constant) cometric

    Returns:
        Chart model with commuting momenta p1, p2
    """
    if not (a > 0 and a * c - b * b > 0):
        raise ParameterError(f"form ((a, b), (b, c)) = (({a}, {b}), ({b}, {c})) is not positive definite", "a,b,c")
    co = np.array([[a, b], [b, c]], dtype=float)
    g = np.linalg.inv(co)
    metric = ChartMetric(
        dim=2,
        g=lambda x: g,
        cometric=lambda x: co,
        coords=(CoordinateSpec("periodic"), CoordinateSpec("periodic")),
    )
    integrals = (
        FirstIntegral("p1", lambda x, p: p[0], degree=1, commuting_sets=("momenta",)),
        FirstIntegral("p2", lambda x, p: p[1], degree=1, commuting_sets=("momenta",)),
    )
    return GeodesicModel("flat_torus", "flat torus", metric, integrals, parameters={"a": a, "b": b, "c": c})


def _sphere_constraint(q):
    return np.dot(q, q) - 1.0


def _sphere_constraint_grad(q):
    return 2.0 * np.asarray(q)


def unit_sphere_state(rng: np.random.Generator, dim: int = 3) -> CotangentState:
    q = rng.normal(size=dim)
    q /= np.linalg.norm(q)
    p = rng.normal(size=dim)
    p -= np.dot(q, p) * q
    return CotangentState(q, p)


def angular_momentum(q, p):
    """Components of the vector integral F = [x, xdot] (ambient velocities equal momenta)."""
    return (
        q[1] * p[2] - q[2] * p[1],
        q[2] * p[0] - q[0] * p[2],
        q[0] * p[1] - q[1] * p[0],
    )


def round_sphere() -> GeodesicModel:
    """
    Unit sphere in R^3 with f1, f2, f3 (the vector integral) and H = 1/2 |F|^2.

    f3(x, p) = p(xi3) with xi3 = (-x2, x1, 0). The three linear integrals do
    not commute; {f1, f2, f3, H} is a non-commutative complete family.
    """
    metric = EmbeddedMetric.diagonal(3, _sphere_constraint, _sphere_constraint_grad)

    def component(k: int):
        return lambda q, p: angular_momentum(q, p)[k]

    def casimir(q, p):
        f = angular_momentum(q, p)
        return 0.5 * (f[0] * f[0] + f[1] * f[1] + f[2] * f[2])

    integrals = tuple(
        FirstIntegral(f"f{k + 1}", component(k), degree=1, commuting_sets=(f"axis{k + 1}",)) for k in range(3)
    ) + (FirstIntegral("H", casimir, degree=2, commuting_sets=("axis1", "axis2", "axis3")),)

    def casimir_identity(s: CotangentState) -> float:
        return abs(float(casimir(s.x, s.p)) - 0.5 * float(np.dot(s.p, s.p)))

    return GeodesicModel(
        "sphere",
        "round sphere",
        metric,
        integrals,
        sampler=unit_sphere_state,
        identities={"H_equals_half_F_squared": casimir_identity},
    )


# -- surfaces of revolution ----------------------------------------------------

def revolution_profile(name: str, **params: float) -> Tuple[ProfileFn, CoordinateSpec, Optional[Callable]]:
    """
    Named meridian profiles r(z), z the meridian arclength.

    Returns the profile, the z-coordinate domain and the distance to the
    chart's singular locus (None when there is none).
    """
    if name == "sphere":
        return (lambda z: ad.sin(z)), CoordinateSpec("box", 0.0, np.pi), (lambda x: min(x[0], np.pi - x[0]))
    if name == "torus":
        big = float(params.get("R", 2.0))
        small = float(params.get("r", 1.0))
        if not big > small > 0:
            raise ParameterError(f"torus profile needs R > r > 0, got R={big}, r={small}", "R")
        return (lambda z: big + small * ad.cos(z / small)), CoordinateSpec("periodic", period=2 * np.pi * small), None
    if name == "catenoid":
        return (lambda z: ad.sqrt(1.0 + z * z)), CoordinateSpec("box", sample_range=(-2.0, 2.0)), None
    raise ParameterError(f"unknown revolution profile {name!r}", "profile")


def surface_of_revolution(r: ProfileFn, z_spec: Optional[CoordinateSpec] = None,
                          singular_distance: Optional[Callable] = None, profile: str = "custom",
                          parameters: Optional[Dict[str, object]] = None) -> GeodesicModel:
    """
    Surface dz^2 + r(z)^2 dphi^2 in the chart (z, phi).

    The Clairaut integral is exposed twice: as the momentum p_phi and in its
    geometric form r cos(psi), psi the angle between the geodesic and the
    parallel, scaled by the speed |v| so that both agree on every state.
    """
    z_spec = z_spec or CoordinateSpec("box", sample_range=(-1.0, 1.0))
    grid = _domain_grid(z_spec)
    radii = np.array([float(r(z)) for z in grid])
    if np.any(radii <= 0) or not np.all(np.isfinite(radii)):
        bad = float(grid[int(np.argmin(radii))])
        raise ParameterError(f"profile r(z) must be positive on the domain (r({bad:.3g}) = {radii.min():.3g})", "r")

    def g(x):
        rz = r(x[0])
        return np.array([[1.0, 0.0], [0.0, rz * rz]], dtype=object if isinstance(rz, ad.Dual) else float)

    def cometric(x):
        rz = r(x[0])
        return np.array([[1.0, 0.0], [0.0, 1.0 / (rz * rz)]], dtype=object if isinstance(rz, ad.Dual) else float)

    metric = ChartMetric(
        dim=2,
        g=g,
        cometric=cometric,
        coords=(z_spec, CoordinateSpec("periodic")),
        singular_distance=singular_distance,
    )

    def clairaut_geometric(x, p):
        rz = r(x[0])
        z_dot, phi_dot = p[0], p[1] / (rz * rz)
        speed = ad.sqrt(z_dot * z_dot + rz * rz * phi_dot * phi_dot)
        # cos(psi) = g(v, e_phi) / |v| with e_phi = d/dphi / r
        cos_psi = rz * phi_dot / speed
        return rz * cos_psi * speed

    integrals = (
        FirstIntegral("p_phi", lambda x, p: p[1], degree=1, commuting_sets=("clairaut",)),
        FirstIntegral("clairaut", clairaut_geometric, degree=1, smoothness="smooth"),
    )

    def clairaut_forms(s: CotangentState) -> float:
        return abs(float(clairaut_geometric(s.x, s.p)) - float(s.p[1]))

    return GeodesicModel(
        "revolution",
        f"surface of revolution ({profile})",
        metric,
        integrals,
        identities={"clairaut_forms_agree": clairaut_forms},
        parameters={"profile": profile, **(parameters or {})},
    )


def revolution_from_profile(profile: str = "torus", **params: float) -> GeodesicModel:
    r, spec, singular = revolution_profile(profile, **params)
    return surface_of_revolution(r, spec, singular, profile, params)


# -- Liouville surfaces --------------------------------------------------------

def liouville_profile(kind: str, c0: float = 1.0, c1: float = 0.0) -> ProfileFn:
    if kind == "constant":
        return lambda t: c0 + 0.0 * t
    if kind == "cosine":
        return lambda t: c0 + c1 * ad.cos(t)
    raise ParameterError(f"unknown Liouville profile {kind!r}", "kind")


def liouville_surface(f: ProfileFn, g: ProfileFn, labels: Optional[Dict[str, object]] = None) -> GeodesicModel:
    """
    Liouville metric (f(x1) + g(x2))(dx1^2 + dx2^2) on the torus.

    Declares F = (g p1^2 - f p2^2)/(f + g), which commutes with H.
    """
    grid = _domain_grid(CoordinateSpec("periodic"))
    total = np.array([[float(f(a)) + float(g(b)) for b in grid] for a in grid])
    if np.any(total <= 0):
        raise ParameterError(f"f + g must be positive (min {total.min():.3g})", "f,g")

    def conformal(x):
        return f(x[0]) + g(x[1])

    def metric_g(x):
        w = conformal(x)
        return np.array([[w, 0.0], [0.0, w]], dtype=object if isinstance(w, ad.Dual) else float)

    def cometric(x):
        w = 1.0 / conformal(x)
        return np.array([[w, 0.0], [0.0, w]], dtype=object if isinstance(w, ad.Dual) else float)

    metric = ChartMetric(
        dim=2,
        g=metric_g,
        cometric=cometric,
        coords=(CoordinateSpec("periodic"), CoordinateSpec("periodic")),
    )

    def quadratic(x, p):
        fx, gx = f(x[0]), g(x[1])
        return (gx * p[0] * p[0] - fx * p[1] * p[1]) / (fx + gx)

    def separated_form(s: CotangentState) -> float:
        # F = p1^2 - 2 H f(x1)
        h = 0.5 * float(np.dot(s.p, s.p)) / float(conformal(s.x))
        return abs(float(quadratic(s.x, s.p)) - (s.p[0] ** 2 - 2.0 * h * float(f(s.x[0]))))

    integrals = (FirstIntegral("F", quadratic, degree=2, commuting_sets=("liouville",)),)
    return GeodesicModel(
        "liouville",
        "Liouville surface",
        metric,
        integrals,
        identities={"separated_form": separated_form},
        parameters=dict(labels or {}),
    )


def liouville_from_params(f_kind: str = "cosine", f_c0: float = 1.0, f_c1: float = 0.5,
                          g_kind: str = "constant", g_c0: float = 1.0, g_c1: float = 0.0) -> GeodesicModel:
    labels = {"f_kind": f_kind, "f_c0": f_c0, "f_c1": f_c1, "g_kind": g_kind, "g_c0": g_c0, "g_c1": g_c1}
    return liouville_surface(liouville_profile(f_kind, f_c0, f_c1), liouville_profile(g_kind, g_c0, g_c1), labels)


def _domain_grid(spec: CoordinateSpec, count: int = 257) -> np.ndarray:
    if spec.kind == "periodic":
        return np.linspace(0.0, spec.period, count, endpoint=False)
    lo = spec.lower if np.isfinite(spec.lower) else spec.sample_range[0]
    hi = spec.upper if np.isfinite(spec.upper) else spec.sample_range[1]
    # open interval: endpoints of a box may sit on the singular locus
    return np.linspace(lo, hi, count + 2)[1:-1]
