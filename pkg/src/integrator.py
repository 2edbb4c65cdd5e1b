"""
Structure-preserving integrators for geodesic flows.

- ``implicit_midpoint_step``: symmetric implicit midpoint rule for chart models.
- ``rattle_step``: constrained symmetric step for embedded models; explicit
  for Euclidean kinetic energy plus potential, implicit (unknowns p_half,
  q1, lambda) when the kinetic energy depends on position.
- ``integrate``: fixed-step driver producing a ``TrajectoryRecord``.

IMPLEMENTATION:
1. Newton iterations use a chord Jacobian assembled from engine
   derivatives (exact velocity Jacobians, FD of exact gradients otherwise).
2. ``integrate`` reuses the factorized Jacobian across steps and refreshes
   it every ``jacobian_refresh`` steps or when convergence slows.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.linalg import lu_factor, lu_solve

from .errors import ConstraintSolveError, DomainError, ParameterError, StepFailedError
from .geometry_core import (
    CotangentState,
    EmbeddedMetric,
    FirstIntegral,
    GeodesicModel,
    derivative,
    jacobian_fd,
    velocity_jacobian,
)
from .utils import atomic_write_text

logger = logging.getLogger(__name__)

SLOW_NEWTON_ITERATIONS = 6


class StepConfig(BaseModel):
    """Fixed step size and Newton settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float
    newton_tol: float = 1e-12
    newton_max_iter: int = Field(default=50, ge=1)
    jacobian_refresh: int = Field(default=20, ge=1)

    @field_validator("dt", "newton_tol")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be > 0")
        return value


class _JacobianCache:
    """Factorized chord Jacobian shared by consecutive steps."""

    def __init__(self, refresh_every: int = 1):
        self.refresh_every = refresh_every
        self.lu = None
        self.h = None
        self.age = 0

    def get(self, h: float, build: Callable[[], np.ndarray]):
        if self.lu is None or self.h != h or self.age >= self.refresh_every:
            self.lu = lu_factor(build())
            self.h = h
            self.age = 0
            logger.debug("chord Jacobian refreshed")
        self.age += 1
        return self.lu

    def invalidate(self) -> None:
        self.lu = None


def _scale(z: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(z))))


def _newton(residual: Callable[[np.ndarray], np.ndarray], u0: np.ndarray, h: float,
            build: Callable[[np.ndarray], np.ndarray], cfg: StepConfig,
            cache: _JacobianCache, scale: float) -> np.ndarray:
    """Chord Newton; one extra correction is applied after the residual test passes."""
    u = u0.copy()
    history: List[float] = []
    refreshed = False
    lu = cache.get(h, lambda: build(u))
    for it in range(cfg.newton_max_iter):
        r = residual(u)
        norm = float(np.max(np.abs(r)))
        history.append(norm)
        if not np.isfinite(norm):
            break
        du = lu_solve(lu, r)
        u = u - du
        if norm <= cfg.newton_tol * scale:
            return u
        if it + 1 >= SLOW_NEWTON_ITERATIONS and not refreshed:
            cache.invalidate()
            lu = cache.get(h, lambda: build(u))
            refreshed = True
    logger.warning("Newton solve failed after %d iterations (last residual %.3e)", len(history), history[-1])
    raise StepFailedError("implicit solve did not converge", history)


def _flow_vector(model: GeodesicModel, z: np.ndarray) -> np.ndarray:
    n = len(z) // 2
    s = CotangentState(z[:n], z[n:])
    v = np.asarray(model.metric.velocity(s.x, s.p), dtype=float)
    return np.concatenate([v, -derivative(model.hamiltonian, s).dx])


def implicit_midpoint_step(model: GeodesicModel, s: CotangentState, cfg: StepConfig,
                           dt: Optional[float] = None, cache: Optional[_JacobianCache] = None) -> CotangentState:
    """
    One implicit midpoint step z1 = z0 + h F((z0 + z1)/2).

    Args:
        dt: overrides ``cfg.dt`` (negative for backward steps, 0 is the identity)
        cache: shared Jacobian cache from ``integrate``
    """
    h = cfg.dt if dt is None else dt
    if h == 0:
        return s
    if model.embedded:
        raise ParameterError("implicit_midpoint_step needs a chart model; use rattle_step", "model")
    model.check_state(s)
    cache = cache or _JacobianCache()
    z0 = s.flat()
    dim = len(z0)

    def residual(z):
        mid = 0.5 * (z0 + z)
        model.metric.check_domain(mid[: dim // 2])
        return z - z0 - h * _flow_vector(model, mid)

    def build(z):
        mid = 0.5 * (z0 + z)
        return np.eye(dim) - 0.5 * h * jacobian_fd(lambda w: _flow_vector(model, w), mid)

    guess = z0 + h * _flow_vector(model, z0)
    z1 = _newton(residual, guess, h, build, cfg, cache, _scale(z0))
    out = CotangentState.from_flat(z1)
    model.metric.check_domain(out.x)
    return out


def _grad_q(model: GeodesicModel, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    return derivative(model.hamiltonian, CotangentState(q, p)).dx


def _solve_position_multiplier(metric: EmbeddedMetric, q_free: np.ndarray, direction: np.ndarray,
                               coeff: float, cfg: StepConfig) -> Tuple[np.ndarray, float]:
    """Scalar Newton for lam with c(q_free - coeff*lam*direction) = 0."""
    lam = 0.0
    q1 = q_free
    target = 1e-2 * cfg.newton_tol
    history = []
    for _ in range(cfg.newton_max_iter):
        c = float(metric.constraint(q1))
        history.append(abs(c))
        if abs(c) <= target:
            return q1, lam
        slope = -coeff * float(np.dot(metric.constraint_grad(q1), direction))
        if slope == 0.0:
            break
        step = c / slope
        lam -= step
        q1 = q_free - coeff * lam * direction
        # stagnation at the rounding floor
        if abs(step) <= 1e-16 * max(1.0, abs(lam)) and abs(c) <= cfg.newton_tol:
            return q1, lam
    raise ConstraintSolveError("position multiplier solve failed", {"residuals": history})


def _project_momentum(metric: EmbeddedMetric, q1: np.ndarray, p_hat: np.ndarray) -> np.ndarray:
    g1 = np.asarray(metric.constraint_grad(q1), dtype=float)
    denom = float(metric.tangency(q1, g1))
    if denom == 0.0:
        raise ConstraintSolveError("momentum multiplier is undetermined (degenerate hidden constraint)")
    return p_hat - float(metric.tangency(q1, p_hat)) / denom * g1


def rattle_step(model: GeodesicModel, s: CotangentState, cfg: StepConfig,
                dt: Optional[float] = None, cache: Optional[_JacobianCache] = None) -> CotangentState:
    """
    Constrained symmetric step with hidden-constraint projection on momenta.

    After the step |c(q')| and |<grad c(q'), dH/dp(q', p')>| sit at the
    Newton tolerance.
    """
    h = cfg.dt if dt is None else dt
    if h == 0:
        return s
    metric = model.metric
    if not isinstance(metric, EmbeddedMetric):
        raise ParameterError("rattle_step needs an embedded model", "model")
    q0, p0 = s.x, s.p
    g0 = np.asarray(metric.constraint_grad(q0), dtype=float)

    if metric.euclidean:
        p_tilde = p0 - 0.5 * h * _grad_q(model, q0, p0)
        q1, lam = _solve_position_multiplier(metric, q0 + h * p_tilde, g0, 0.5 * h * h, cfg)
        p_half = p_tilde - 0.5 * h * lam * g0
        p_hat = p_half - 0.5 * h * _grad_q(model, q1, p_half)
        return CotangentState(q1, _project_momentum(metric, q1, p_hat))

    n = len(q0)
    cache = cache or _JacobianCache()

    def residual(u):
        p_half, q1, lam = u[:n], u[n:2 * n], u[2 * n]
        r1 = p_half - p0 + 0.5 * h * (_grad_q(model, q0, p_half) + lam * g0)
        r2 = q1 - q0 - 0.5 * h * (np.asarray(metric.velocity(q0, p_half), dtype=float)
                                  + np.asarray(metric.velocity(q1, p_half), dtype=float))
        r3 = float(metric.constraint(q1))
        return np.concatenate([r1, r2, [r3]])

    def build(u):
        p_half, q1 = u[:n], u[n:2 * n]
        dvq0, w0 = velocity_jacobian(metric, q0, p_half)
        dvq1, w1 = velocity_jacobian(metric, q1, p_half)
        jac = np.zeros((2 * n + 1, 2 * n + 1))
        jac[:n, :n] = np.eye(n) + 0.5 * h * dvq0.T
        jac[:n, 2 * n] = 0.5 * h * g0
        jac[n:2 * n, :n] = -0.5 * h * (w0 + w1)
        jac[n:2 * n, n:2 * n] = np.eye(n) - 0.5 * h * dvq1
        jac[2 * n, n:2 * n] = np.asarray(metric.constraint_grad(q1), dtype=float)
        return jac

    p_guess = p0 - 0.5 * h * _grad_q(model, q0, p0)
    q_guess = q0 + h * np.asarray(metric.velocity(q0, p_guess), dtype=float)
    u0 = np.concatenate([p_guess, q_guess, [0.0]])
    try:
        u = _newton(residual, u0, h, build, cfg, cache, _scale(s.flat()))
    except StepFailedError as e:
        raise ConstraintSolveError("constrained implicit solve failed", {"residuals": e.residuals}) from e
    p_half, q1 = u[:n], u[n:2 * n]
    p_hat = p_half - 0.5 * h * _grad_q(model, q1, p_half)
    return CotangentState(q1, _project_momentum(metric, q1, p_hat))


def stepper_for(model: GeodesicModel) -> Callable:
    return rattle_step if model.embedded else implicit_midpoint_step


@dataclass
class TrajectoryRecord:
    """Sampled trajectory; integral columns follow the model's declaration order."""

    model_key: str
    times: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    energy: np.ndarray
    integral_names: Tuple[str, ...]
    integral_values: np.ndarray
    constraint_residual: Optional[np.ndarray] = None
    tangency_residual: Optional[np.ndarray] = None
    dt: float = 0.0
    step_count: int = 0
    report_map: Optional[Callable] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def states(self) -> List[CotangentState]:
        return [CotangentState(x, p) for x, p in zip(self.positions, self.momenta)]

    def values(self, name: str) -> np.ndarray:
        if name == "H":
            return self.energy
        return self.integral_values[:, self.integral_names.index(name)]

    def drift(self) -> Dict[str, float]:
        """max_t |F(t) - F(0)| / max(1, |F(0)|) per integral, plus H."""
        out = {"H": _relative_drift(self.energy)}
        for k, name in enumerate(self.integral_names):
            out[name] = _relative_drift(self.integral_values[:, k])
        return out

    def max_constraint_residual(self) -> float:
        if self.constraint_residual is None:
            return 0.0
        return float(max(np.max(self.constraint_residual), np.max(self.tangency_residual)))

    def columns(self) -> List[str]:
        n = self.positions.shape[1]
        cols = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + ["H"]
        cols += list(self.integral_names)
        if self.constraint_residual is not None:
            cols += ["constraint_residual", "tangency_residual"]
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        for k in range(len(self)):
            x, p = self.positions[k], self.momenta[k]
            if self.report_map is not None:
                x, p = self.report_map(x, p)
            row = [self.times[k], *x, *p, self.energy[k], *self.integral_values[k]]
            if self.constraint_residual is not None:
                row += [self.constraint_residual[k], self.tangency_residual[k]]
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())

    def summary(self) -> Dict[str, object]:
        return {
            "model": self.model_key,
            "samples": len(self),
            "steps": self.step_count,
            "dt": self.dt,
            "t_end": float(self.times[-1]),
            "drift": self.drift(),
            "max_constraint_residual": self.max_constraint_residual(),
        }


def _relative_drift(values: np.ndarray) -> float:
    if len(values) == 0:
        return 0.0
    return float(np.max(np.abs(values - values[0])) / max(1.0, abs(values[0])))


def integrate(model: GeodesicModel, s0: CotangentState, cfg: StepConfig, t_end: float,
              sample_every: int = 1, extra_integrals: Sequence[FirstIntegral] = ()) -> TrajectoryRecord:
    """
    Fixed-step integration from ``s0`` over [0, t_end].

    When dt does not divide t_end the last step is shortened so the final
    sample lands on t_end. Every declared integral (and any
    ``extra_integrals``) is evaluated at each sample. Step errors are
    re-raised with the failing step index.
    """
    if t_end < 0:
        raise ParameterError("t_end must be positive", "t_end")
    if sample_every < 1:
        raise ParameterError("sample_every must be >= 1", "sample_every")
    model.check_state(s0)
    integrals = tuple(model.integrals) + tuple(extra_integrals)
    step = stepper_for(model)
    cache = _JacobianCache(cfg.jacobian_refresh)
    full_steps = int(np.floor(t_end / cfg.dt + 1e-9))
    remainder = t_end - full_steps * cfg.dt
    last_cfg = cfg
    n_steps = full_steps
    if remainder > 1e-9 * cfg.dt:
        last_cfg = cfg.model_copy(update={"dt": remainder})
        n_steps += 1

    samples: List[Tuple[float, CotangentState]] = [(0.0, s0)]
    s = s0
    for k in range(1, n_steps + 1):
        try:
            s = step(model, s, cfg if k <= full_steps else last_cfg, cache=cache)
        except StepFailedError as e:
            e.step_index = k
            e.details["step_index"] = k
            raise
        except (ConstraintSolveError, DomainError) as e:
            e.details["step_index"] = k
            raise
        if k == n_steps:
            samples.append((float(t_end), s))
        elif k % sample_every == 0:
            samples.append((k * cfg.dt, s))

    times = np.array([t for t, _ in samples])
    positions = np.array([st.x for _, st in samples])
    momenta = np.array([st.p for _, st in samples])
    energy = np.array([float(model.hamiltonian(st.x, st.p)) for _, st in samples])
    values = np.array([[f.eval(st) for f in integrals] for _, st in samples]).reshape(len(samples), len(integrals))
    constraint = tangency = None
    if model.embedded:
        res = np.array([model.metric.residuals(st) for _, st in samples])
        constraint, tangency = res[:, 0], res[:, 1]
    report_map = None if model.embedded else model.metric.report
    logger.debug("integrated %s: %d steps, %d samples", model.key, n_steps, len(samples))
    return TrajectoryRecord(
        model_key=model.key,
        times=times,
        positions=positions,
        momenta=momenta,
        energy=energy,
        integral_names=tuple(f.name for f in integrals),
        integral_values=values,
        constraint_residual=constraint,
        tangency_residual=tangency,
        dt=cfg.dt,
        step_count=n_steps,
        report_map=report_map,
    )
