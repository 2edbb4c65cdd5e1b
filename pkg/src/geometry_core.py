"""
Phase-space states, metrics and the geodesic Hamiltonian.

Two metric representations are supported:

- ``ChartMetric``: coordinates x in R^dim with metric coefficients g(x)
  (or the cometric g^{-1}(x)) and a per-coordinate domain description.
- ``EmbeddedMetric``: a level set {c(q) = 0} in R^N with a kinetic energy
  K(q, p) and its closed-form velocity dK/dp. The phase space is
  {c(q) = 0, <grad c(q), dK/dp(q, p)> = 0}.

All model functions are written with numpy and the primitives from
``autodiff`` so that ``derivative`` differentiates them exactly.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import seed_variables, tangent_of, value_of
from .errors import DegenerateMetricError, DerivativeError, DomainError, GeodesicLabError

logger = logging.getLogger(__name__)

SINGULAR_MARGIN = 1e-6
FD_STEP = np.cbrt(np.finfo(float).eps)
PHASE_TOLERANCE = 1e-8

PhaseFunction = Callable[[np.ndarray, np.ndarray], Any]


@dataclass(frozen=True)
class CotangentState:
    """Configuration ``x`` (chart coordinates or ambient point q) and momenta ``p``."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        p = np.array(self.p, dtype=float)
        if x.shape != p.shape or x.ndim != 1:
            raise ValueError(f"state shapes differ: x{x.shape} p{p.shape}")
        x.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])

    @classmethod
    def from_flat(cls, z: np.ndarray) -> "CotangentState":
        n = len(z) // 2
        return cls(z[:n], z[n:])


@dataclass(frozen=True)
class GradientPair:
    dx: np.ndarray
    dp: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dx, self.dp])


@dataclass(frozen=True)
class CoordinateSpec:
    """Domain of one chart coordinate: ``box`` (bounds may be infinite) or ``periodic``."""

    kind: str = "box"
    lower: float = -np.inf
    upper: float = np.inf
    period: float = 2 * np.pi
    sample_range: Tuple[float, float] = (-1.0, 1.0)

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "periodic":
            return float(rng.uniform(0.0, self.period))
        lo = self.lower if np.isfinite(self.lower) else self.sample_range[0]
        hi = self.upper if np.isfinite(self.upper) else self.sample_range[1]
        return float(rng.uniform(lo, hi))


def _dual_inverse(m: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse that works on object arrays of Duals."""
    n = m.shape[0]
    a = np.array(m, dtype=object)
    inv = np.array(np.eye(n), dtype=object)
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(value_of(a[r, col])))
        if abs(value_of(a[pivot, col])) < 1e-300:
            raise DegenerateMetricError("metric matrix is singular")
        a[[col, pivot]] = a[[pivot, col]]
        inv[[col, pivot]] = inv[[pivot, col]]
        scale = a[col, col]
        a[col] = a[col] / scale
        inv[col] = inv[col] / scale
        for r in range(n):
            if r != col:
                factor = a[r, col]
                a[r] = a[r] - factor * a[col]
                inv[r] = inv[r] - factor * inv[col]
    return inv


@dataclass(frozen=True)
class ChartMetric:
    """
    Metric in a single chart.

    Args:
        dim: number of coordinates
        g: x -> dim x dim metric coefficients
        cometric: optional x -> g^{-1}(x); inverted from ``g`` when missing
        coords: per-coordinate domain
        singular_distance: optional x -> distance to the coordinate singular locus
        report_map: optional (x, p) -> (x, p) applied only when reporting
    """

    dim: int
    g: Callable[[np.ndarray], np.ndarray]
    cometric: Optional[Callable[[np.ndarray], np.ndarray]] = None
    coords: Tuple[CoordinateSpec, ...] = ()
    singular_distance: Optional[Callable[[np.ndarray], float]] = None
    report_map: Optional[Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]] = None

    def inverse(self, x: np.ndarray) -> np.ndarray:
        if self.cometric is not None:
            return self.cometric(x)
        g = np.asarray(self.g(x))
        if g.dtype == object:
            return _dual_inverse(g)
        return np.linalg.inv(g)

    def kinetic(self, x, p):
        c = self.inverse(x)
        return 0.5 * np.dot(p, np.dot(c, p))

    def velocity(self, x, p):
        return np.dot(self.inverse(x), p)

    def specs(self) -> Tuple[CoordinateSpec, ...]:
        return self.coords or tuple(CoordinateSpec() for _ in range(self.dim))

    def check_domain(self, x: np.ndarray) -> None:
        x = np.asarray(value_of(x), dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite coordinates", {"x": x.tolist()})
        for i, spec in enumerate(self.specs()):
            if spec.kind == "box" and not (spec.lower <= x[i] <= spec.upper):
                raise DomainError(f"coordinate {i} outside [{spec.lower}, {spec.upper}]", {"x": x.tolist()})
        if self.singular_distance is not None and self.singular_distance(x) < SINGULAR_MARGIN:
            raise DomainError("state within 1e-6 of the chart's singular locus", {"x": x.tolist()})

    def check_nondegenerate(self, x: np.ndarray) -> None:
        g = np.asarray(value_of(self.g(np.asarray(x, dtype=float))), dtype=float)
        eig = np.linalg.eigvalsh(0.5 * (g + g.T))
        if eig[0] <= 1e-14 * max(1.0, abs(eig[-1])):
            raise DegenerateMetricError("metric is not positive definite", {"eigenvalues": eig.tolist()})

    def report(self, x: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.report_map is not None:
            return self.report_map(x, p)
        x = np.array(x, dtype=float)
        for i, spec in enumerate(self.specs()):
            if spec.kind == "periodic":
                x[i] = np.mod(x[i], spec.period)
        return x, np.array(p, dtype=float)


@dataclass(frozen=True)
class EmbeddedMetric:
    """
    Metric on the level set {c(q) = 0} in R^N.

    ``kinetic`` and ``velocity`` must be consistent (velocity = dK/dp) and
    velocity must be linear in p.
    """

    ambient_dim: int
    constraint: Callable[[np.ndarray], Any]
    constraint_grad: Callable[[np.ndarray], np.ndarray]
    kinetic: Callable[[np.ndarray, np.ndarray], Any]
    velocity: Callable[[np.ndarray, np.ndarray], np.ndarray]
    potential: Optional[Callable[[np.ndarray], Any]] = None
    euclidean: bool = False

    @classmethod
    def diagonal(
        cls,
        ambient_dim: int,
        constraint: Callable,
        constraint_grad: Callable,
        weights: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        potential: Optional[Callable] = None,
    ) -> "EmbeddedMetric":
        """Ambient form diag(w(q)); ``weights=None`` is the Euclidean metric."""
        if weights is None:
            return cls(
                ambient_dim,
                constraint,
                constraint_grad,
                kinetic=lambda q, p: 0.5 * np.dot(p, p),
                velocity=lambda q, p: 1.0 * np.asarray(p),
                potential=potential,
                euclidean=True,
            )
        return cls(
            ambient_dim,
            constraint,
            constraint_grad,
            kinetic=lambda q, p: 0.5 * np.sum(p * p / weights(q)),
            velocity=lambda q, p: p / weights(q),
            potential=potential,
        )

    def tangency(self, q, p):
        return np.dot(self.constraint_grad(q), self.velocity(q, p))

    def residuals(self, s: CotangentState) -> Tuple[float, float]:
        return abs(float(self.constraint(s.x))), abs(float(self.tangency(s.x, s.p)))


Metric = Union[ChartMetric, EmbeddedMetric]


@dataclass(frozen=True)
class FirstIntegral:
    """
    Named phase-space function with metadata.

    ``fn(x, p)`` must be written with numpy/autodiff primitives; ``grad_fn``
    optionally supplies a closed-form gradient returning ``GradientPair``.
    """

    name: str
    fn: PhaseFunction
    degree: Union[int, str] = 2
    smoothness: str = "analytic"
    commuting_sets: Tuple[str, ...] = ()
    grad_fn: Optional[Callable[[CotangentState], GradientPair]] = None

    def eval(self, s: CotangentState) -> float:
        return float(self.fn(s.x, s.p))

    def grad(self, s: CotangentState) -> GradientPair:
        if self.grad_fn is not None:
            return self.grad_fn(s)
        return derivative(self.fn, s)

    def gradient(self, s: CotangentState) -> np.ndarray:
        return self.grad(s).flat()


@dataclass(frozen=True)
class GeodesicModel:
    """
    A metric, its Hamiltonian and the declared first integrals.

    ``identities`` are model-specific algebraic checks: name -> (state -> residual).
    ``companions`` holds related objects (a Neumann system, SOL data, ...).
    """

    key: str
    name: str
    metric: Metric
    integrals: Tuple[FirstIntegral, ...] = ()
    sampler: Optional[Callable[[np.random.Generator], CotangentState]] = None
    identities: Dict[str, Callable[[CotangentState], float]] = field(default_factory=dict)
    companions: Dict[str, Any] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def embedded(self) -> bool:
        return isinstance(self.metric, EmbeddedMetric)

    @property
    def dim(self) -> int:
        return self.metric.ambient_dim if self.embedded else self.metric.dim

    @property
    def phase_dim(self) -> int:
        return 2 * (self.dim - 1) if self.embedded else 2 * self.dim

    def hamiltonian(self, x, p):
        h = self.metric.kinetic(x, p)
        if self.embedded and self.metric.potential is not None:
            h = h + self.metric.potential(x)
        return h

    def integral(self, name: str) -> FirstIntegral:
        for f in self.integrals:
            if f.name == name:
                return f
        raise KeyError(f"{self.key} declares no integral {name!r}")

    def commuting_set(self, label: str) -> List[FirstIntegral]:
        return [f for f in self.integrals if label in f.commuting_sets]

    def hamiltonian_integral(self) -> FirstIntegral:
        return FirstIntegral("H", self.hamiltonian, degree=2)

    def check_state(self, s: CotangentState) -> None:
        if s.dim != self.dim:
            raise DomainError(f"state has dimension {s.dim}, model {self.key} needs {self.dim}")
        if not self.embedded:
            self.metric.check_domain(s.x)

    def check_phase_space(self, s: CotangentState) -> None:
        """Embedded states must satisfy c(q) = 0 and <grad c, dK/dp> = 0."""
        if not self.embedded:
            return
        constraint, tangency = self.metric.residuals(s)
        if constraint > PHASE_TOLERANCE:
            raise DomainError(f"state is off the constraint surface of {self.key} (|c(q)| = {constraint:.3g})")
        scale = float(np.linalg.norm(self.metric.constraint_grad(s.x))) * float(np.linalg.norm(s.p))
        if tangency > PHASE_TOLERANCE * max(1.0, scale):
            raise DomainError(f"momentum is not tangent to the constraint surface of {self.key} (residual {tangency:.3g})")


def hamiltonian_eval(model: GeodesicModel, s: CotangentState) -> float:
    """H(s) = kinetic energy (plus potential for mechanical embedded models)."""
    model.check_state(s)
    model.check_phase_space(s)
    if not model.embedded:
        model.metric.check_nondegenerate(s.x)
    try:
        value = model.hamiltonian(s.x, s.p)
    except (ZeroDivisionError, np.linalg.LinAlgError) as e:
        raise DegenerateMetricError(f"metric not invertible at state: {e}") from e
    value = float(value)
    if not np.isfinite(value):
        raise DegenerateMetricError("Hamiltonian is not finite at state")
    return value


def hamiltonian_flow_field(model: GeodesicModel, s: CotangentState) -> Tuple[np.ndarray, np.ndarray]:
    """(dx/dt, dp/dt) = (dH/dp, -dH/dx); dH/dp from the metric's closed-form velocity."""
    model.check_state(s)
    dxdt = np.asarray(value_of(model.metric.velocity(s.x, s.p)), dtype=float)
    grad = derivative(model.hamiltonian, s)
    return dxdt, -grad.dx


def derivative(fn: PhaseFunction, s: CotangentState, method: str = "auto") -> GradientPair:
    """
    Gradient of ``fn(x, p)`` at ``s``.

    Exact forward-mode derivatives when ``fn`` is built from registered
    primitives; otherwise (or with ``method="fd"``) 4th-order central
    differences with h_i = cbrt(eps) * max(1, |s_i|).
    """
    n = s.dim
    if method in ("auto", "ad"):
        try:
            out = fn(seed_variables(s.x, 0, 2 * n), seed_variables(s.p, n, 2 * n))
            g = tangent_of(out, 2 * n)
            return GradientPair(g[:n], g[n:])
        except (TypeError, AttributeError) as e:
            if method == "ad":
                raise
            logger.debug("falling back to finite differences: %s", e)
    z0 = s.flat()
    g = finite_difference_gradient(lambda z: float(fn(z[:n], z[n:])), z0)
    return GradientPair(g[:n], g[n:])


def finite_difference_gradient(fn: Callable[[np.ndarray], float], z0: np.ndarray) -> np.ndarray:
    """4th-order central differences of a scalar function of a flat vector."""
    grad = np.zeros_like(z0, dtype=float)
    for i in range(len(z0)):
        h = FD_STEP * max(1.0, abs(z0[i]))
        values = []
        for k in (2, 1, -1, -2):
            z = np.array(z0, dtype=float)
            z[i] += k * h
            try:
                values.append(fn(z))
            except GeodesicLabError:
                raise
            except Exception as e:
                raise DerivativeError(f"evaluation failed at stencil offset {k}h of component {i}: {e}", i, k * h) from e
        f2, f1, fm1, fm2 = values
        grad[i] = (-f2 + 8.0 * f1 - 8.0 * fm1 + fm2) / (12.0 * h)
    return grad


def jacobian_fd(vector_fn: Callable[[np.ndarray], np.ndarray], z0: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of a vector function (columns per input component)."""
    z0 = np.asarray(z0, dtype=float)
    f0 = np.asarray(vector_fn(z0), dtype=float)
    jac = np.zeros((f0.size, z0.size))
    for i in range(z0.size):
        h = FD_STEP * max(1.0, abs(z0[i]))
        zp = z0.copy()
        zm = z0.copy()
        zp[i] += h
        zm[i] -= h
        jac[:, i] = (np.asarray(vector_fn(zp), dtype=float) - np.asarray(vector_fn(zm), dtype=float)) / (2 * h)
    return jac


def hessian(fn: PhaseFunction, s: CotangentState) -> np.ndarray:
    """Hessian over (x, p) by central differences of the exact gradient."""
    n = s.dim
    return jacobian_fd(lambda z: derivative(fn, CotangentState(z[:n], z[n:])).flat(), s.flat())


def velocity_jacobian(metric: Metric, q: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Exact (d velocity/dq, d velocity/dp) from one forward sweep."""
    n = len(q)
    out = metric.velocity(seed_variables(q, 0, 2 * n), seed_variables(p, n, 2 * n))
    jac = np.vstack([tangent_of(o, 2 * n) for o in np.asarray(out, dtype=object).ravel()])
    return jac[:, :n], jac[:, n:]


def project_to_phase_space(model: GeodesicModel, q: Sequence[float], p: Sequence[float]) -> CotangentState:
    """Move q onto {c = 0} along grad c, then make p tangent (hidden constraint)."""
    metric = model.metric
    if not isinstance(metric, EmbeddedMetric):
        return CotangentState(q, p)
    q = np.array(q, dtype=float)
    for _ in range(100):
        c = float(metric.constraint(q))
        if abs(c) <= 1e-15:
            break
        n = np.asarray(metric.constraint_grad(q), dtype=float)
        q = q - c * n / np.dot(n, n)
    p = np.array(p, dtype=float)
    n = np.asarray(metric.constraint_grad(q), dtype=float)
    denom = float(metric.tangency(q, n))
    # two passes remove the rounding left by the first
    for _ in range(2):
        p = p - float(metric.tangency(q, p)) / denom * n
    return CotangentState(q, p)


def sample_states(model: GeodesicModel, count: int, rng: np.random.Generator) -> List[CotangentState]:
    """Seeded generic phase states for verification."""
    states = []
    for _ in range(count):
        if model.sampler is not None:
            states.append(model.sampler(rng))
        elif model.embedded:
            q = rng.normal(size=model.dim)
            states.append(project_to_phase_space(model, q, rng.normal(size=model.dim)))
        else:
            x = np.array([spec.sample(rng) for spec in model.metric.specs()])
            states.append(CotangentState(x, rng.normal(size=model.dim)))
    return states


