"""
Ellipsoids and confocal quadrics.

Moser's quadratic integrals on Q = {<A^-1 x, x> = 1}, the Chasles tangency
parameters of a geodesic's tangent lines, and the projectively equivalent
companion metric with its operator field S.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import null_space

from ..errors import DegenerateLineError, ParameterError
from ..geometry_core import CotangentState, EmbeddedMetric, FirstIntegral, GeodesicModel

logger = logging.getLogger(__name__)

MIN_GAP = 1e-8
POLE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class EllipsoidParams:
    """Squared semi-axes a1 > a2 > ... > an > 0."""

    a: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        object.__setattr__(self, "a", a)
        if len(a) < 2:
            raise ParameterError("an ellipsoid needs at least two axes", "a")
        if a[-1] <= 0:
            raise ParameterError(f"squared semi-axes must be positive, got {a}", "a")
        gaps = -np.diff(a)
        if np.any(gaps <= 0):
            raise ParameterError(f"squared semi-axes must be strictly decreasing, got {a}", "a")
        if gaps.min() < MIN_GAP:
            raise ParameterError(f"axis gap {gaps.min():.1e} below {MIN_GAP:.0e}", "a")

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.a)


def quadric_metric(params: EllipsoidParams, weights=None) -> EmbeddedMetric:
    inv = 1.0 / params.array
    return EmbeddedMetric.diagonal(
        params.n,
        constraint=lambda x: np.dot(x * inv, x) - 1.0,
        constraint_grad=lambda x: 2.0 * inv * x,
        weights=weights,
    )


def quadric_state(params: EllipsoidParams, rng: np.random.Generator) -> CotangentState:
    """Random point of Q with a random tangent vector (Euclidean identification)."""
    a = params.array
    u = rng.normal(size=params.n)
    x = u / np.sqrt(np.dot(u * u, 1.0 / a))
    normal = x / a
    v = rng.normal(size=params.n)
    v -= np.dot(normal, v) / np.dot(normal, normal) * normal
    return CotangentState(x, v)


def moser_integral(a: np.ndarray, k: int):
    """F_k = p_k^2 + sum_{l != k} (x_k p_l - x_l p_k)^2 / (a_k - a_l)."""

    def fn(x, p):
        total = p[k] * p[k]
        for l in range(len(a)):
            if l != k:
                m = x[k] * p[l] - x[l] * p[k]
                total = total + m * m / (a[k] - a[l])
        return total

    return fn


def ellipsoid_moser(params: EllipsoidParams) -> GeodesicModel:
    """
    Geodesics on the ellipsoid with Moser's integrals F_1..F_n.

    Velocities are identified with momenta through the ambient Euclidean
    metric.
    """
    a = params.array
    integrals = tuple(
        FirstIntegral(f"F{k + 1}", moser_integral(a, k), degree=2, commuting_sets=("moser",))
        for k in range(params.n)
    )

    def sum_identity(s: CotangentState) -> float:
        total = sum(float(f.fn(s.x, s.p)) for f in integrals)
        return abs(total - float(np.dot(s.p, s.p)))

    def weighted_identity(s: CotangentState) -> float:
        # sum F_k / a_k vanishes on T*Q
        return abs(sum(float(f.fn(s.x, s.p)) / a[k] for k, f in enumerate(integrals)))

    return GeodesicModel(
        "ellipsoid",
        f"ellipsoid a={params.a}",
        quadric_metric(params),
        integrals,
        sampler=lambda rng: quadric_state(params, rng),
        identities={"moser_sum": sum_identity, "moser_weighted_sum": weighted_identity},
        parameters={"a": list(params.a)},
    )


def tangency_polynomial(x: np.ndarray, xdot: np.ndarray, a: np.ndarray) -> Polynomial:
    """
    Tangency discriminant of the line x + t xdot against Q(alpha), cleared of
    the denominators prod_l (a_l - alpha) and divided once by that product.

    The quotient has degree n - 1; alpha = 0 is always a root (Q itself).
    """
    n = len(a)
    factors = [Polynomial([a_l, -1.0]) for a_l in a]
    full = Polynomial([1.0])
    for fct in factors:
        full = full * fct
    partial = []
    for k in range(n):
        prod = Polynomial([1.0])
        for l in range(n):
            if l != k:
                prod = prod * factors[l]
        partial.append(prod)
    mixed = sum((x[k] * xdot[k] * partial[k] for k in range(n)), Polynomial([0.0]))
    position = sum((x[k] * x[k] * partial[k] for k in range(n)), Polynomial([0.0])) - full
    velocity = sum((xdot[k] * xdot[k] * partial[k] for k in range(n)), Polynomial([0.0]))
    numerator = mixed * mixed - position * velocity
    quotient, _ = divmod(numerator, full)
    return quotient


def chasles_tangency(x: Sequence[float], xdot: Sequence[float], params: EllipsoidParams) -> List[float]:
    """
    Parameters alpha_1..alpha_{n-2} of the confocal quadrics Q(alpha) touched
    by the tangent line of a geodesic through x with direction xdot.

    Raises:
        DegenerateLineError: the real root count is not n - 2 (umbilic directions)
    """
    a = params.array
    x = np.asarray(x, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    speed = np.linalg.norm(xdot)
    if speed == 0:
        raise DegenerateLineError("zero direction has no tangent line")
    poly = tangency_polynomial(x, xdot / speed, a)
    roots = poly.roots()
    if len(roots) == 0:
        raise DegenerateLineError("tangency polynomial is constant", {"x": x.tolist()})
    trivial = int(np.argmin(np.abs(roots)))
    roots = np.delete(roots, trivial)
    scale = max(1.0, float(np.max(np.abs(a))))
    real = [float(r.real) for r in roots if abs(r.imag) <= 1e-6 * scale]
    real = [r for r in real if np.min(np.abs(a - r)) > POLE_TOLERANCE]
    if len(real) != params.n - 2:
        raise DegenerateLineError(
            f"expected {params.n - 2} tangency parameters, found {len(real)}",
            {"roots": [complex(r) for r in roots], "x": x.tolist(), "xdot": xdot.tolist()},
        )
    return sorted(real)


# -- projectively equivalent pair -----------------------------------------------

@dataclass(frozen=True)
class ProjectiveFamily:
    """
    The ellipsoid metric g, its projectively equivalent companion gbar and
    the operator field S relating them.

    ``operator`` follows the defining formula (det gbar/det g)^{1/n} gbar^-1 g;
    ``explicit_operator`` is (A - x x^T) on T_xQ. They differ by the constant
    factor det(A)^{-1/n}, which scales every family member uniformly and
    leaves geodesic equivalence untouched.
    """

    params: EllipsoidParams
    g: GeodesicModel
    g_bar: GeodesicModel

    @property
    def normalization(self) -> float:
        return float(np.prod(self.params.array)) ** (-1.0 / self.params.n)

    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        """Orthonormal basis of T_xQ as columns."""
        return null_space((np.asarray(x) / self.params.array)[None, :])

    def sigma(self, x: np.ndarray) -> float:
        y = np.asarray(x) / self.params.array
        return float(np.dot(y, y))

    def gram(self, x: np.ndarray, barred: bool = False) -> np.ndarray:
        """Ambient matrix of g (identity) or gbar = A^-1 / sigma."""
        if barred:
            return np.diag(1.0 / self.params.array) / self.sigma(x)
        return np.eye(self.params.n)

    def operator(self, x: np.ndarray) -> np.ndarray:
        basis = self.tangent_basis(x)
        g_bar = basis.T @ self.gram(x, barred=True) @ basis
        local = np.linalg.det(g_bar) ** (1.0 / self.params.n) * np.linalg.inv(g_bar)
        return basis @ local @ basis.T

    def explicit_operator(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        proj = self.tangent_basis(x)
        proj = proj @ proj.T
        return proj @ (np.diag(self.params.array) - np.outer(x, x)) @ proj

    def member(self, k: int, x: np.ndarray, barred: bool = False) -> np.ndarray:
        """Ambient matrix of g_k = g S^k (or gbar S^k) on T_xQ, k in {-1, 0, 1, 2}."""
        if k not in (-1, 0, 1, 2):
            raise ParameterError(f"family member index must be in -1..2, got {k}", "k")
        basis = self.tangent_basis(x)
        s_local = basis.T @ self.explicit_operator(x) @ basis
        power = np.linalg.matrix_power(s_local, k) if k >= 0 else np.linalg.inv(s_local)
        local = basis.T @ self.gram(x, barred) @ basis @ power
        return basis @ local @ basis.T

    def bar_momentum(self, x: np.ndarray, velocity: np.ndarray) -> np.ndarray:
        """gbar-momentum of an ambient tangent velocity."""
        return (np.asarray(velocity) / self.params.array) / self.sigma(x)


def projective_family(params: EllipsoidParams) -> ProjectiveFamily:
    a = params.array
    inv = 1.0 / a

    def g_bar_weights(x):
        y = x * inv
        sigma = np.dot(y, y)
        return inv / sigma

    g_bar = GeodesicModel(
        "projective_bar",
        f"projective companion a={params.a}",
        quadric_metric(params, weights=g_bar_weights),
        sampler=lambda rng: _bar_state(params, rng),
        parameters={"a": list(params.a)},
    )
    g = ellipsoid_moser(params)
    family = ProjectiveFamily(params, g, g_bar)
    return GeodesicModel(
        "projective",
        g.name,
        g.metric,
        g.integrals,
        sampler=g.sampler,
        identities=dict(g.identities),
        companions={"family": family, "g_bar": g_bar},
        parameters=dict(g.parameters),
    )


def _bar_state(params: EllipsoidParams, rng: np.random.Generator) -> CotangentState:
    s = quadric_state(params, rng)
    y = s.x / params.array
    return CotangentState(s.x, (s.p / params.array) / np.dot(y, y))
