"""
Topological entropy of torus maps and of the SOL return map.

- ``toral_entropy_exact``: ln of the spectral radius of an integer matrix.
- ``sol_return_map``: fiber map over one turn of the base circle, read off
  a vertical geodesic and the fiber frame transported along it.
- ``spanning_entropy_estimate``: greedy (eps, T)-spanning sets of grid
  orbits; slopes of ln N against T.

Torus coordinates are normalized to [0, 1) with max-norm distance.
"""

import csv
import io
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.spatial import cKDTree

from .catalog.sol import TWO_PI
from .errors import ParameterError, StepFailedError
from .geometry_core import CotangentState, GeodesicModel, hamiltonian_flow_field, jacobian_fd
from .integrator import StepConfig, integrate
from .utils import atomic_write_text, dumps_deterministic

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.2, 0.1, 0.05)
DEFAULT_HORIZONS = tuple(range(13))
SATURATION_DIVISOR = 16
VERTICAL_TOLERANCE = 1e-9


def toral_entropy_exact(B: Sequence[Sequence[float]]) -> float:
    """
    Entropy of the toral automorphism x -> Bx: ln of the spectral radius, or 0.

    Raises:
        ParameterError: B not square, not integer, or |det B| != 1
    """
    m = np.asarray(B, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"need a square matrix, got shape {m.shape}", "B")
    if not np.all(m == np.round(m)):
        raise ParameterError("toral automorphism needs integer entries", "B")
    if round(abs(np.linalg.det(m))) != 1:
        raise ParameterError(f"toral automorphism needs det = +-1, got {np.linalg.det(m):.6g}", "B")
    radius = float(np.max(np.abs(np.linalg.eigvals(m))))
    return float(np.log(radius)) if radius > 1.0 + 1e-12 else 0.0


# -- torus maps -------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusMap:
    """Self-map of [0, 1)^dim acting on row arrays of points."""

    name: str
    dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    exact_entropy: Optional[float] = None

    def orbit(self, points: np.ndarray, steps: int) -> np.ndarray:
        """Array of shape (len(points), steps + 1, dim)."""
        out = np.empty((len(points), steps + 1, self.dim))
        x = np.mod(points, 1.0)
        out[:, 0] = x
        for t in range(1, steps + 1):
            x = np.mod(self.apply(x), 1.0)
            out[:, t] = x
        return out


def toral_automorphism(B: Sequence[Sequence[float]]) -> TorusMap:
    m = np.asarray(B, dtype=float)
    entropy = toral_entropy_exact(m)
    return TorusMap(f"automorphism{np.rint(m).astype(int).tolist()}", m.shape[0], lambda x: x @ m.T, entropy)


def rigid_rotation(alpha: Sequence[float] = (np.sqrt(2) - 1, np.sqrt(3) - 1)) -> TorusMap:
    shift = np.asarray(alpha, dtype=float)
    return TorusMap(f"rotation{shift.round(6).tolist()}", len(shift), lambda x: x + shift, 0.0)


def circle_doubling() -> TorusMap:
    return TorusMap("doubling", 1, lambda x: 2.0 * x, float(np.log(2.0)))


def _grid(resolution: int, dim: int) -> np.ndarray:
    axis = np.arange(resolution) / resolution
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


# -- estimator --------------------------------------------------------------------------

class EntropyEstimate(BaseModel):
    """
    Spanning-set counts N(eps, T) (rows eps, columns T) and the per-eps
    slopes of ln N against T over unsaturated horizons.
    """

    model_config = ConfigDict(frozen=True)

    map_name: str
    resolution: int
    epsilons: List[float]
    horizons: List[int]
    counts: List[List[int]]
    raw_counts: List[List[int]]
    saturated: List[List[bool]]
    slopes: List[Optional[float]]
    estimate: Optional[float]
    exact: Optional[float] = None

    @model_validator(mode="after")
    def _monotone(self) -> "EntropyEstimate":
        n = np.asarray(self.counts)
        if n.size and (np.any(np.diff(n, axis=1) < 0) or np.any(np.diff(n, axis=0) < 0)):
            raise ValueError("N(eps, T) must be nondecreasing in T and as eps decreases")
        return self

    @property
    def raw_monotone(self) -> bool:
        n = np.asarray(self.raw_counts)
        return bool(np.all(np.diff(n, axis=1) >= 0) and np.all(np.diff(n, axis=0) >= 0))

    def to_json(self) -> str:
        data = self.model_dump()
        data["raw_monotone"] = self.raw_monotone
        return dumps_deterministic(data)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epsilon", "T", "N", "lnN_over_T", "saturated"])
        for i, eps in enumerate(self.epsilons):
            for j, horizon in enumerate(self.horizons):
                count = self.counts[i][j]
                rate = np.log(count) / horizon if horizon > 0 else float("nan")
                writer.writerow([repr(eps), horizon, count, repr(float(rate)), int(self.saturated[i][j])])
        return buf.getvalue()

    def write(self, directory, stem: str = "entropy") -> Dict[str, str]:
        json_path = atomic_write_text(f"{directory}/{stem}.json", self.to_json())
        csv_path = atomic_write_text(f"{directory}/{stem}.csv", self.to_csv())
        return {"json": str(json_path), "csv": str(csv_path)}


def _greedy_cover(tree: cKDTree, points: np.ndarray, eps: float, cap: int) -> int:
    """Greedy eps-net in the max-norm of the stacked orbit coordinates; stops past ``cap``."""
    covered = np.zeros(len(points), dtype=bool)
    count = 0
    for i in range(len(points)):
        if covered[i]:
            continue
        count += 1
        if count > cap:
            return count
        covered[tree.query_ball_point(points[i], eps, p=np.inf)] = True
    return count


def _fit_slope(horizons: np.ndarray, counts: np.ndarray) -> Optional[float]:
    if len(horizons) < 2:
        return None
    # skip T = 0 when the remaining horizons still give a fit
    if horizons[0] == 0 and len(horizons) > 2:
        horizons, counts = horizons[1:], counts[1:]
    slope, _ = np.polyfit(horizons, np.log(counts), 1)
    return float(max(slope, 0.0))


def spanning_entropy_estimate(torus_map: TorusMap, epsilons: Sequence[float] = DEFAULT_EPSILONS,
                              horizons: Sequence[int] = DEFAULT_HORIZONS, resolution: int = 512) -> EntropyEstimate:
    """
    N(eps, T) by greedy covering of the grid orbits under
    d_T(x, y) = max_{0 <= t <= T} |F^t x - F^t y|_inf on the torus.

    Counts above resolution^dim / 16 are saturated and excluded from the
    slopes. Reported counts are made monotone by a running maximum over
    larger eps and shorter T; the greedy counts are kept as ``raw_counts``.

    Raises:
        ParameterError: grid spacing exceeds eps / 4, or empty eps/T lists
    """
    eps_list = sorted((float(e) for e in epsilons), reverse=True)
    t_list = sorted(int(t) for t in horizons)
    if not eps_list or not t_list:
        raise ParameterError("need at least one epsilon and one horizon", "epsilons")
    if t_list[0] < 0:
        raise ParameterError("horizons must be nonnegative", "horizons")
    if 1.0 / resolution > eps_list[-1] / 4.0:
        raise ParameterError(
            f"grid spacing 1/{resolution} too coarse for eps={eps_list[-1]:g} (need spacing <= eps/4)",
            "resolution")

    points = _grid(resolution, torus_map.dim)
    cap = len(points) // SATURATION_DIVISOR
    orbits = torus_map.orbit(points, t_list[-1])
    raw = np.zeros((len(eps_list), len(t_list)), dtype=int)
    for j, horizon in enumerate(t_list):
        stacked = orbits[:, :horizon + 1].reshape(len(points), -1)
        stacked = np.where(stacked >= 1.0, 0.0, stacked)
        tree = cKDTree(stacked, boxsize=1.0)
        for i, eps in enumerate(eps_list):
            raw[i, j] = _greedy_cover(tree, stacked, eps, cap)
        logger.debug("%s T=%d counts %s", torus_map.name, horizon, raw[:, j].tolist())

    counts = np.maximum.accumulate(np.maximum.accumulate(raw, axis=1), axis=0)
    saturated = counts > cap
    slopes: List[Optional[float]] = []
    for i in range(len(eps_list)):
        keep = ~saturated[i]
        slopes.append(_fit_slope(np.asarray(t_list)[keep], counts[i][keep]))
    if np.any(raw != counts):
        logger.info("%s: greedy counts adjusted to be monotone", torus_map.name)
    return EntropyEstimate(
        map_name=torus_map.name,
        resolution=resolution,
        epsilons=eps_list,
        horizons=t_list,
        counts=counts.tolist(),
        raw_counts=raw.tolist(),
        saturated=saturated.tolist(),
        slopes=slopes,
        estimate=slopes[-1],
        exact=torus_map.exact_entropy,
    )


# -- SOL return map ---------------------------------------------------------------------
# -- SOL return map ---------------------------------------------------------------------

def _flow_jacobian(model: GeodesicModel, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Linearization of the Hamiltonian vector field at (x, p), over the flat phase vector."""
    n = model.dim

    def field(z: np.ndarray) -> np.ndarray:
        dxdt, dpdt = hamiltonian_flow_field(model, CotangentState(z[:n], z[n:]))
        return np.concatenate([dxdt, dpdt])

    return jacobian_fd(field, np.concatenate([x, p]))


def _variational_transport(times: np.ndarray, jacobians: np.ndarray, frame: np.ndarray, dt: float) -> np.ndarray:
    """
    Carry ``frame`` along dV/dt = A(t) V over [0, times[-1]] with Cayley
    (implicit midpoint) steps; A is linear in t between the sampled Jacobians.
    """
    steps = int(np.ceil(times[-1] / dt))
    h = times[-1] / steps
    eye = np.eye(jacobians.shape[1])
    t_mid = (np.arange(steps) + 0.5) * h
    index = np.clip(np.searchsorted(times, t_mid) - 1, 0, len(times) - 2)
    weight = (t_mid - times[index]) / (times[index + 1] - times[index])
    for k in range(steps):
        A = (1.0 - weight[k]) * jacobians[index[k]] + weight[k] * jacobians[index[k] + 1]
        frame = np.linalg.solve(eye - 0.5 * h * A, frame + 0.5 * h * (A @ frame))
    return frame


def _deck_jacobian(report: Callable, x: np.ndarray, p: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Derivative of the fiber part of the model's report map in the fiber coordinates."""
    jac = np.zeros((2, 2))
    for i in range(2):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        diff = report(xp, p)[0][:2] - report(xm, p)[0][:2]
        jac[:, i] = (np.mod(diff + np.pi, TWO_PI) - np.pi) / (2.0 * h)
    return jac


def sol_return_map(model: GeodesicModel, dt: float = 1e-4, flow_dt: float = 1e-2,
                   base_point: Sequence[float] = (0.3, 0.7)) -> np.ndarray:
    """
    Fiber map of the time-2pi flow on the invariant set of unit-speed
    vertical geodesics.

    The vertical geodesic through ``base_point`` is integrated with the
    model's stepper at ``flow_dt``. The variational equations of H along it
    carry the fiber directions from z = 0 to z = 2pi (Cayley steps of size
    ``dt``), and the model's own deck transformation brings the endpoint
    fiber back over z = 0. The product is the returned 2x2 matrix.

    Raises:
        ParameterError: model without torus-bundle gluing, or nonpositive steps
        StepFailedError: the integrated geodesic leaves the vertical set
    """
    report = getattr(model.metric, "report_map", None)
    if model.companions.get("sol") is None or report is None:
        raise ParameterError(f"model {model.key!r} is not a torus bundle", "model")
    if not dt > 0 or not flow_dt > 0:
        raise ParameterError("step sizes must be positive", "dt")

    flow_steps = int(np.ceil(TWO_PI / flow_dt))
    s0 = CotangentState(np.array([base_point[0], base_point[1], 0.0]), np.array([0.0, 0.0, 1.0]))
    record = integrate(model, s0, StepConfig(dt=TWO_PI / flow_steps), TWO_PI)
    x_end, p_end = record.positions[-1], record.momenta[-1]
    deviation = max(float(np.max(np.abs(x_end[:2] - s0.x[:2]))), float(np.max(np.abs(p_end[:2]))),
                    abs(float(x_end[2]) - TWO_PI))
    if deviation > VERTICAL_TOLERANCE:
        raise StepFailedError("vertical geodesic left the invariant set", [deviation], flow_steps)

    jacobians = np.array([_flow_jacobian(model, x, p) for x, p in zip(record.positions, record.momenta)])
    start = np.zeros((2 * model.dim, 2))
    start[0, 0] = start[1, 1] = 1.0
    transported = _variational_transport(record.times, jacobians, start, dt)

    # the endpoint lies on the fiber z = 2pi up to the tolerance checked above
    x_glue = np.array([x_end[0], x_end[1], TWO_PI])
    deck = _deck_jacobian(report, x_glue, p_end)
    fiber_map = deck @ transported[:2]
    logger.debug("return map of %s at dt=%g: %s", model.key, dt, fiber_map.tolist())
    return fiber_map
