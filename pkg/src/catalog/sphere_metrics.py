"""
Integrable metrics on spheres.

- Neumann system and its Maupertuis metric (h - V) <dq, dq>
- Brailov/Manakov metrics H_{a,b} and the deformed Hamiltonian F
- Kovalevskaya and Goryachev-Chaplygin metrics (metric only)
"""

import logging
from typing import Callable, Dict, Sequence

import numpy as np

from ..errors import ParameterError
from ..geometry_core import CotangentState, EmbeddedMetric, FirstIntegral, GeodesicModel, sample_states
from .classical import unit_sphere_state

logger = logging.getLogger(__name__)


def _sphere(q):
    return np.dot(q, q) - 1.0


def _sphere_grad(q):
    return 2.0 * np.asarray(q)


def _strictly_decreasing(values: np.ndarray) -> bool:
    return bool(np.all(np.diff(values) < 0))


def maupertuis_metric(base: GeodesicModel, potential: Callable, h: float, key: str = "maupertuis",
                      samples: int = 256, seed: int = 0) -> GeodesicModel:
    """
    Conformal metric (h - V) g whose geodesics are the trajectories of g + V
    at energy h, up to reparametrization.

    Args:
        base: embedded model with Euclidean kinetic energy
        potential: V(q), written with numpy/autodiff primitives
        h: energy level, must exceed max V over sampled configurations

    Returns:
        Embedded model with H_h = |p|^2 / (2 (h - V))
    """
    metric = base.metric
    if not (isinstance(metric, EmbeddedMetric) and metric.euclidean):
        raise ParameterError("maupertuis_metric needs an embedded model with Euclidean kinetic energy", "base")
    states = sample_states(base, samples, np.random.default_rng(seed))
    v_max = max(float(potential(s.x)) for s in states)
    if not h > v_max:
        raise ParameterError(f"energy h={h} must exceed max V (sampled {v_max:.6g})", "h")
    ones = np.ones(metric.ambient_dim)
    conformal = EmbeddedMetric.diagonal(
        metric.ambient_dim,
        metric.constraint,
        metric.constraint_grad,
        weights=lambda q: (h - potential(q)) * ones,
    )
    return GeodesicModel(key, f"Maupertuis metric of {base.name} at h={h}", conformal,
                         sampler=base.sampler, parameters={"h": h})


def _neumann_cross_terms(a: np.ndarray, k: int, q, p):
    total = 0.0
    for i in range(len(a)):
        if i != k:
            m = q[k] * p[i] - q[i] * p[k]
            total = total + m * m / (a[k] - a[i])
    return total


def neumann_system(a: Sequence[float]) -> GeodesicModel:
    """H = 1/2 <p, p> + 1/2 <A q, q> on the unit sphere with Uhlenbeck's integrals."""
    a = np.asarray(a, dtype=float)
    if len(set(a.tolist())) != len(a):
        raise ParameterError(f"A must have distinct eigenvalues, got {a.tolist()}", "A")
    metric = EmbeddedMetric.diagonal(len(a), _sphere, _sphere_grad, potential=lambda q: 0.5 * np.dot(a * q, q))

    def uhlenbeck(k: int):
        return lambda q, p: q[k] * q[k] + _neumann_cross_terms(a, k, q, p)

    integrals = tuple(
        FirstIntegral(f"F{k + 1}", uhlenbeck(k), degree=2, commuting_sets=("uhlenbeck",)) for k in range(len(a))
    )

    def sum_identity(s: CotangentState) -> float:
        return abs(sum(float(f.fn(s.x, s.p)) for f in integrals) - 1.0)

    return GeodesicModel(
        "neumann_system",
        "Neumann system",
        metric,
        integrals,
        sampler=lambda rng: unit_sphere_state(rng, len(a)),
        identities={"uhlenbeck_sum": sum_identity},
        parameters={"A": a.tolist()},
    )


def neumann_maupertuis(A: Sequence[float] = (1.5, 1.0, 0.5), h: float = 2.0) -> GeodesicModel:
    """
    Maupertuis metric (h - 1/2 <Aq, q>) <dq, dq> of the Neumann system.

    Integrals Fbar_k = H_h q_k^2 + sum_{i != k} (q_k p_i - q_i p_k)^2 / (a_k - a_i)
    with H_h = |p|^2 / (2h - <Aq, q>). The Neumann system itself is exposed
    as ``companions["neumann"]``.
    """
    a = np.asarray(A, dtype=float)
    if not h > 0.5 * a.max():
        raise ParameterError(f"energy h={h} must exceed max V = a_max/2 = {0.5 * a.max()}", "h")
    neumann = neumann_system(a)
    base = maupertuis_metric(neumann, lambda q: 0.5 * np.dot(a * q, q), h, key="neumann")

    def reduced(q, p):
        return np.dot(p, p) / (2.0 * h - np.dot(a * q, q))

    def barred(k: int):
        return lambda q, p: reduced(q, p) * q[k] * q[k] + _neumann_cross_terms(a, k, q, p)

    integrals = tuple(
        FirstIntegral(f"Fbar{k + 1}", barred(k), degree=2, commuting_sets=("uhlenbeck",)) for k in range(len(a))
    )

    def maupertuis_sum(s: CotangentState) -> float:
        total = sum(float(f.fn(s.x, s.p)) for f in integrals)
        return abs(total - float(base.hamiltonian(s.x, s.p)))

    return GeodesicModel(
        "neumann",
        f"Maupertuis metric of the Neumann system, h={h}",
        base.metric,
        integrals,
        sampler=neumann.sampler,
        identities={"maupertuis_sum": maupertuis_sum, "uhlenbeck_sum": neumann.identities["uhlenbeck_sum"]},
        companions={"neumann": neumann},
        parameters={"A": a.tolist(), "h": h},
    )


def matched_neumann_momenta(model: GeodesicModel, q: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Neumann momentum at energy h along ``direction``; the same vector starts the Maupertuis geodesic."""
    a = np.asarray(model.parameters["A"])
    h = model.parameters["h"]
    u = np.asarray(direction, dtype=float)
    u = u - np.dot(q, u) * q
    u /= np.linalg.norm(u)
    return np.sqrt(2.0 * (h - 0.5 * np.dot(a * q, q))) * u


# -- Brailov / Manakov ------------------------------------------------------------

def brailov_manakov_sphere(a: Sequence[float], b: Sequence[float], deformed: bool = False) -> GeodesicModel:
    """
    Metric H_{a,b} = 1/2 sum_{i<j} c_ij M_ij^2 on S^{n-1}, c_ij = (b_i - b_j)/(a_i - a_j),
    M_ij = q_i p_j - q_j p_i.

    With ``deformed`` the Hamiltonian gains 1/2 sum d_i (Pi p)_i^2 with
    d_i = (b_{n+1} - b_i)/(a_i - a_{n+1}) (Pi the projector orthogonal to q),
    and the declared integrals are
    F_k = sum_{i<j} (a_i^k - a_j^k)/(a_i - a_j) M_ij^2 - sum_i (a_{n+1}^k - a_i^k)/(a_{n+1} - a_i) p_i^2.
    Undeformed, the integrals are the Manakov sums without the p_i^2 terms.
    F_1 vanishes on T*S^{n-1} (deformed) or equals |p|^2 (undeformed).

    The kinetic energy carries 1/2 (q.p)^2/|q|^2, which does not change the
    flow on the phase space and makes the hidden constraint q.p = 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 3:
        raise ParameterError("a and b need n + 1 >= 3 entries each", "a")
    n = len(a) - 1
    if not _strictly_decreasing(a):
        raise ParameterError(f"need a_1 > ... > a_n > a_(n+1), got {a.tolist()}", "a")
    if not _strictly_decreasing(b[:n]):
        raise ParameterError(f"need b_1 > ... > b_n, got {b[:n].tolist()}", "b")
    if deformed and not b[n] > b[0]:
        raise ParameterError(f"need b_(n+1) > b_1 for the deformation, got {b[n]} <= {b[0]}", "b")

    diff_a = a[:n, None] - a[None, :n]
    np.fill_diagonal(diff_a, 1.0)
    coupling = (b[:n, None] - b[None, :n]) / diff_a
    np.fill_diagonal(coupling, 0.0)
    shift = (b[n] - b[:n]) / (a[:n] - a[n]) if deformed else np.zeros(n)

    def rotations(q, p):
        return np.outer(q, p) - np.outer(p, q)

    def kinetic(q, p):
        m = rotations(q, p)
        qq = np.dot(q, q)
        qp = np.dot(q, p)
        total = 0.25 * np.sum(coupling * m * m) + 0.5 * qp * qp / qq
        if deformed:
            tangential = p - (qp / qq) * q
            total = total + 0.5 * np.sum(shift * tangential * tangential)
        return total

    def velocity(q, p):
        m = rotations(q, p)
        qq = np.dot(q, q)
        qp = np.dot(q, p)
        v = np.dot((coupling * m).T, q) + (qp / qq) * q
        if deformed:
            tangential = p - (qp / qq) * q
            dp = shift * tangential
            v = v + dp - (np.dot(q, dp) / qq) * q
        return v

    metric = EmbeddedMetric(n, _sphere, _sphere_grad, kinetic, velocity)

    def manakov(k: int):
        weights = (a[:n, None] ** k - a[None, :n] ** k) / diff_a
        np.fill_diagonal(weights, 0.0)
        tail = (a[n] ** k - a[:n] ** k) / (a[n] - a[:n])

        def fn(q, p):
            m = rotations(q, p)
            total = 0.5 * np.sum(weights * m * m)
            if deformed:
                total = total - np.sum(tail * p * p)
            return total

        return fn

    integrals = tuple(
        FirstIntegral(f"F{k}", manakov(k), degree=2, commuting_sets=("manakov",)) for k in range(1, n + 1)
    )

    def first_member(s: CotangentState) -> float:
        value = float(integrals[0].fn(s.x, s.p))
        return abs(value) if deformed else abs(value - float(np.dot(s.p, s.p)))

    return GeodesicModel(
        "brailov",
        "Brailov deformation" if deformed else "Manakov metric H_{a,b}",
        metric,
        integrals,
        sampler=lambda rng: unit_sphere_state(rng, n),
        identities={"F1_on_sphere": first_member},
        parameters={"a": a.tolist(), "b": b.tolist(), "deformed": deformed},
    )


def sphere_metric_sp1(a: Sequence[float]) -> GeodesicModel:
    """
    Special case b_i = -1/a_i of H_{a,b}: the dual form of
    <A dx, dx> / <A^-1 q, q> restricted to the sphere (a_i > 0 decreasing).
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ParameterError(f"need positive a, got {a.tolist()}", "a")
    extended_a = np.append(a, 0.5 * a[-1])
    extended_b = np.append(-1.0 / a, 0.0)
    model = brailov_manakov_sphere(extended_a, extended_b)
    return GeodesicModel("brailov", "sphere metric <A dx, dx>/<A^-1 q, q>", model.metric, model.integrals,
                         sampler=model.sampler, identities=dict(model.identities),
                         parameters={"a": extended_a.tolist(), "b": extended_b.tolist(), "deformed": False})


# -- rigid body metrics -------------------------------------------------------------

RIGID_BODY_CASES: Dict[str, Dict[str, object]] = {
    "kovalevskaya": {"A": (1.0, 1.0, 2.0), "factor": 0.5},
    "goryachev_chaplygin": {"A": (1.0, 1.0, 4.0), "factor": 0.25},
}


def rigid_body_maupertuis(case: str, h: float = 2.0) -> GeodesicModel:
    """
    Metric factor (h - q1) <A dx, dx> / <A^-1 q, q> on the unit sphere.

    Only H is declared; the cubic and quartic integrals are not shipped.
    """
    if case not in RIGID_BODY_CASES:
        raise ParameterError(f"unknown case {case!r}; expected one of {sorted(RIGID_BODY_CASES)}", "case")
    if not h > 1.0:
        raise ParameterError(f"need h > 1 so that h - q1 > 0 on the sphere, got h={h}", "h")
    spec = RIGID_BODY_CASES[case]
    a = np.asarray(spec["A"], dtype=float)
    factor = float(spec["factor"])

    def weights(q):
        s = np.dot(q / a, q)
        return (factor * (h - q[0]) / s) * a

    metric = EmbeddedMetric.diagonal(3, _sphere, _sphere_grad, weights=weights)
    return GeodesicModel(
        case,
        f"{case.replace('_', '-')} metric at h={h}",
        metric,
        parameters={"case": case, "h": h, "A": a.tolist()},
    )
