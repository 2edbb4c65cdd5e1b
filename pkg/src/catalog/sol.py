"""
Torus bundles over the circle with monodromy B (SOL for hyperbolic B,
NIL for parabolic B).

The model lives on the universal cover with coordinates (x, y, z). The
fiber metric is G(z) = C(z)^T C(z) with C(z) = exp(z L / 2pi) and L = log B,
so that G(z + 2pi) = B^T G(z) B; for symmetric B this is G(z) = B^{z/pi}.
The deck transformation (w, z) -> (B^-1 w, z + 2pi) acts on fiber momenta
by p_w -> B^T p_w.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .. import autodiff as ad
from ..errors import ParameterError
from ..geometry_core import ChartMetric, CoordinateSpec, CotangentState, FirstIntegral, GeodesicModel

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
GLUING_TOLERANCE = 1e-12


def _as_monodromy(B: Sequence[Sequence[float]]) -> np.ndarray:
    m = np.asarray(B, dtype=float)
    if m.shape != (2, 2):
        raise ParameterError(f"monodromy must be 2x2, got shape {m.shape}", "B")
    if not np.all(m == np.round(m)):
        raise ParameterError(f"monodromy must have integer entries, got {m.tolist()}", "B")
    if round(np.linalg.det(m)) != 1:
        raise ParameterError(f"monodromy must be unimodular with det 1, got det {np.linalg.det(m):.6g}", "B")
    return m


@dataclass(frozen=True)
class SolModel:
    """
    Monodromy data of a torus bundle.

    Attributes:
        B: monodromy
        L: real logarithm of B (traceless)
        kind: "hyperbolic" or "parabolic"
        lam: eigenvalue > 1 (1 for parabolic B)
        covectors: rows u_1, u_2 with l_i(p) = <u_i, p_w>; for parabolic B,
            u_1 spans the fixed line and u_2 is a generalized eigenvector
    """

    B: np.ndarray
    L: np.ndarray
    kind: str
    lam: float
    covectors: np.ndarray
    fiber_metric: Optional[Callable] = None

    @property
    def delta(self) -> float:
        # L^2 = delta * I
        return float(-np.linalg.det(self.L))

    def frame(self, z):
        """C(z) = exp(z L / 2pi) in closed form; accepts Dual z."""
        t = z / TWO_PI
        if self.delta > 0:
            root = np.sqrt(self.delta)
            return ad.cosh(t * root) * np.eye(2) + (ad.sinh(t * root) / root) * self.L
        return np.eye(2) + t * self.L

    def G(self, z) -> np.ndarray:
        if self.fiber_metric is not None:
            return self.fiber_metric(z)
        c = self.frame(z)
        return np.dot(c.T, c)

    def G_inverse(self, z) -> np.ndarray:
        c = self.frame(-z)
        return np.dot(c, c.T)

    def gluing_residual(self, z: float) -> float:
        lhs = np.asarray(ad.value_of(self.G(z + TWO_PI)), dtype=float)
        rhs = self.B.T @ np.asarray(ad.value_of(self.G(z)), dtype=float) @ self.B
        return float(np.max(np.abs(lhs - rhs)))

    def deck(self, x: np.ndarray, p: np.ndarray, times: int) -> Tuple[np.ndarray, np.ndarray]:
        """Apply the deck transformation ``times`` times (negative allowed)."""
        w = np.linalg.matrix_power(self.B, -times) @ x[:2] if times else x[:2]
        pw = np.linalg.matrix_power(self.B.T, times) @ p[:2] if times else p[:2]
        return (np.array([w[0], w[1], x[2] + TWO_PI * times]),
                np.array([pw[0], pw[1], p[2]]))

    def report(self, x: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Move to z in [0, 2pi) by deck transformations, then reduce the fiber mod 2pi."""
        times = -int(np.floor(x[2] / TWO_PI))
        x2, p2 = self.deck(np.asarray(x, dtype=float), np.asarray(p, dtype=float), times)
        x2[:2] = np.mod(x2[:2], TWO_PI)
        return x2, p2

    def eigen_coordinates(self, pw):
        return np.dot(self.covectors, pw)

    def invariant_f1(self, pw):
        l1, l2 = self.eigen_coordinates(pw)
        if self.kind == "parabolic":
            return l1 * l1
        return l1 * l2

    def invariant_f2(self, pw):
        f1 = self.invariant_f1(pw)
        if ad.value_of(f1) == 0:
            return 0.0 * f1
        l1, l2 = self.eigen_coordinates(pw)
        if self.kind == "parabolic":
            phase = TWO_PI * l2 / l1
        else:
            phase = TWO_PI * ad.log(abs(l1)) / np.log(self.lam)
        return ad.exp(-1.0 / (f1 * f1)) * ad.cos(phase)


def sol_data(B: Sequence[Sequence[float]], G: Optional[Callable] = None) -> SolModel:
    """Validate the monodromy and compute its logarithm and eigen-covectors."""
    m = _as_monodromy(B)
    trace = float(np.trace(m))
    if trace > 2:
        if G is None and not np.allclose(m, m.T):
            raise ParameterError("non-symmetric hyperbolic monodromy needs a user-supplied fiber metric G", "B")
        values, vectors = np.linalg.eig(m)
        order = np.argsort(-values.real)
        values = values.real[order]
        vectors = vectors.real[:, order]
        log_values = np.log(values)
        L = (vectors @ np.diag(log_values) @ np.linalg.inv(vectors))
        kind, lam, covectors = "hyperbolic", float(values[0]), vectors.T
    elif trace == 2:
        nilpotent = m - np.eye(2)
        if not np.any(nilpotent):
            raise ParameterError("identity monodromy gives a flat torus, not a NIL bundle", "B")
        # B u = u and B w = w + u
        u = nilpotent[:, 0] if np.any(nilpotent[:, 0]) else nilpotent[:, 1]
        w = np.linalg.lstsq(nilpotent, u, rcond=None)[0]
        kind, lam, covectors, L = "parabolic", 1.0, np.vstack([u, w]), nilpotent
    else:
        raise ParameterError(f"need trace B >= 2, got {trace:g}", "B")
    data = SolModel(m, L, kind, lam, covectors, fiber_metric=G)
    if G is not None:
        worst = max(data.gluing_residual(z) for z in np.linspace(0.0, TWO_PI, 17))
        if worst > GLUING_TOLERANCE * max(1.0, float(np.max(np.abs(m))) ** 2):
            raise ParameterError(f"fiber metric violates G(z + 2pi) = B^T G(z) B (residual {worst:.2e})", "G")
    return data


def sol_manifold(B: Sequence[Sequence[float]] = ((2, 1), (1, 1)), G: Optional[Callable] = None,
                 key: Optional[str] = None) -> GeodesicModel:
    """
    Torus bundle metric ds^2 = <G(z) dw, dw> + dz^2 with invariants F1, F2.

    F1 = l1 l2 (hyperbolic) or l1^2 (parabolic) is analytic; F2 is
    exp(-1/F1^2) cos(2pi ln|l1| / ln lam) (hyperbolic) or
    exp(-1/F1^2) cos(2pi l2/l1) (parabolic), smooth but not analytic.
    """
    data = sol_data(B, G)

    def g(x):
        fiber = data.G(x[2])
        out = np.empty((3, 3), dtype=object)
        out[:] = 0.0
        out[:2, :2] = fiber
        out[2, 2] = 1.0
        return out

    def cometric(x):
        fiber = data.G_inverse(x[2])
        out = np.empty((3, 3), dtype=object)
        out[:] = 0.0
        out[:2, :2] = fiber
        out[2, 2] = 1.0
        return out

    free = CoordinateSpec("box", sample_range=(0.0, TWO_PI))
    metric = ChartMetric(
        dim=3,
        g=g,
        cometric=None if G is not None else cometric,
        coords=(free, free, free),
        report_map=data.report,
    )
    integrals = (
        FirstIntegral("F1", lambda x, p: data.invariant_f1(p[:2]), degree=2, commuting_sets=("sol",)),
        FirstIntegral("F2", lambda x, p: data.invariant_f2(p[:2]), degree="non-polynomial", smoothness="smooth",
                      commuting_sets=("sol",)),
    )

    def f1_invariance(s: CotangentState) -> float:
        pw = s.p[:2]
        return abs(float(data.invariant_f1(data.B.T @ pw)) - float(data.invariant_f1(pw)))

    def f2_invariance(s: CotangentState) -> float:
        pw = s.p[:2]
        return abs(float(data.invariant_f2(data.B.T @ pw)) - float(data.invariant_f2(pw)))

    def gluing(s: CotangentState) -> float:
        return data.gluing_residual(float(s.x[2]))

    key = key or ("sol" if data.kind == "hyperbolic" else "nil")
    return GeodesicModel(
        key,
        f"{key.upper()} torus bundle B={data.B.astype(int).tolist()}",
        metric,
        integrals,
        identities={"F1_monodromy": f1_invariance, "F2_monodromy": f2_invariance, "gluing": gluing},
        companions={"sol": data},
        parameters={"B": data.B.astype(int).tolist()},
    )
