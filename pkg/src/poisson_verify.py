"""
Verification engine: Poisson brackets, commutation matrices, independence
ranks, conservation drift and ddim/dind completeness bookkeeping.

A ``PoissonStructure`` supplies the tensor Pi(state) in flat coordinates;
brackets are {f, g} = 1/2 (df.Pi.dg - dg.Pi.df), antisymmetric by
construction. Embedded models use the Dirac tensor of the constraints
c(q) = 0 and <grad c, dK/dp> = 0, so canonical relations on T*Q are exact.
"""

import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.linalg import null_space, qr

from .geometry_core import (
    FD_STEP,
    CotangentState,
    EmbeddedMetric,
    FirstIntegral,
    GeodesicModel,
    derivative,
    finite_difference_gradient,
)
from .integrator import TrajectoryRecord

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-8


class PoissonStructure:
    """
    Poisson tensor on a flat coordinate space.

    Subclasses override ``tensor``; ``gradient`` asks the member for its own
    gradient, ``tangent_basis`` restricts ranks to a submanifold.
    """

    kind = "custom"

    def __init__(self, phase_dim: int, tensor_fn: Optional[Callable[[Any], np.ndarray]] = None):
        self.phase_dim = phase_dim
        self._tensor_fn = tensor_fn

    def tensor(self, state) -> np.ndarray:
        if self._tensor_fn is None:
            raise NotImplementedError(f"{type(self).__name__} needs a tensor function")
        return np.asarray(self._tensor_fn(state), dtype=float)

    def gradient(self, f, state) -> np.ndarray:
        return np.asarray(f.gradient(state), dtype=float)

    def tangent_basis(self, state) -> Optional[np.ndarray]:
        return None

    def flatten(self, state) -> np.ndarray:
        return np.asarray(state, dtype=float)

    def unflatten(self, z: np.ndarray):
        return np.asarray(z, dtype=float)

    def bracket_from_gradients(self, df: np.ndarray, dg: np.ndarray, state) -> float:
        pi = self.tensor(state)
        return 0.5 * (float(df @ pi @ dg) - float(dg @ pi @ df))

    def bracket(self, f, g, state) -> float:
        return self.bracket_from_gradients(self.gradient(f, state), self.gradient(g, state), state)

    def restricted_gradients(self, family: Sequence, state) -> np.ndarray:
        """Rows are member gradients, restricted to the tangent space when one is declared."""
        rows = np.vstack([self.gradient(f, state) for f in family])
        basis = self.tangent_basis(state)
        return rows if basis is None else rows @ basis

    def rank(self, state, tol: float = RANK_TOLERANCE) -> int:
        pi = self.tensor(state)
        basis = self.tangent_basis(state)
        if basis is not None:
            pi = basis.T @ pi @ basis
        return numerical_rank(pi, tol)


def _symplectic_matrix(n: int) -> np.ndarray:
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


class CanonicalStructure(PoissonStructure):
    """Sum(df/dx dg/dp - dg/dx df/dp) on T*R^n, or its Dirac reduction for embedded models."""

    kind = "canonical"

    def __init__(self, model: Optional[GeodesicModel] = None, dim: Optional[int] = None):
        self.model = model
        n = model.dim if model is not None else dim
        if n is None:
            raise ValueError("CanonicalStructure needs a model or a dimension")
        super().__init__(model.phase_dim if model is not None else 2 * n)
        self.n = n
        self.j = _symplectic_matrix(n)
        if model is not None and model.embedded:
            self.kind = "dirac"

    def _constraint_gradients(self, s: CotangentState) -> np.ndarray:
        metric: EmbeddedMetric = self.model.metric
        d1 = derivative(lambda x, p: metric.constraint(x), s).flat()
        d2 = derivative(metric.tangency, s).flat()
        return np.column_stack([d1, d2])

    def tensor(self, s: CotangentState) -> np.ndarray:
        if self.kind != "dirac":
            return self.j
        phi = self._constraint_gradients(s)
        jphi = self.j @ phi
        c = phi.T @ jphi
        return self.j - jphi @ np.linalg.solve(c, phi.T @ self.j)

    def tangent_basis(self, s: CotangentState) -> Optional[np.ndarray]:
        if self.kind != "dirac":
            return None
        return null_space(self._constraint_gradients(s).T)

    def flatten(self, s: CotangentState) -> np.ndarray:
        return s.flat()

    def unflatten(self, z: np.ndarray) -> CotangentState:
        return CotangentState.from_flat(z)


def structure_for(model: GeodesicModel) -> CanonicalStructure:
    return CanonicalStructure(model)


def _as_integral(f) -> FirstIntegral:
    if isinstance(f, FirstIntegral):
        return f
    return FirstIntegral(getattr(f, "__name__", "f"), f)


def canonical_bracket(f, g, s: CotangentState, model: Optional[GeodesicModel] = None) -> float:
    """
    {f, g}(s) for phase functions or ``FirstIntegral``s.

    Without a model (or with a chart model) this is the canonical bracket;
    embedded models use the Dirac bracket of their constraints.
    """
    structure = CanonicalStructure(model) if model is not None else CanonicalStructure(dim=s.dim)
    return structure.bracket(_as_integral(f), _as_integral(g), s)


def numerical_rank(m: np.ndarray, tol: float = RANK_TOLERANCE, scale: Optional[float] = None) -> int:
    """Singular values above tol * max(sigma_max, scale)."""
    if m.size == 0:
        return 0
    sv = np.linalg.svd(np.atleast_2d(m), compute_uv=False)
    ref = sv[0] if scale is None else max(sv[0], scale)
    if ref == 0:
        return 0
    return int(np.sum(sv > tol * ref))


class FunctionFamily:
    """Members evaluable on one phase space with a declared bracket."""

    def __init__(self, members: Sequence, structure: PoissonStructure, name: str = "family"):
        self.members = list(members)
        self.structure = structure
        self.name = name

    def __len__(self) -> int:
        return len(self.members)

    @property
    def names(self) -> List[str]:
        return [m.name for m in self.members]

    @classmethod
    def from_model(cls, model: GeodesicModel, names: Optional[Sequence[str]] = None,
                   include_hamiltonian: bool = False) -> "FunctionFamily":
        members = [model.integral(n) for n in names] if names is not None else list(model.integrals)
        if include_hamiltonian:
            members.append(model.hamiltonian_integral())
        return cls(members, structure_for(model), name=model.key)


def commutation_residual(family: FunctionFamily, states: Sequence) -> np.ndarray:
    """Matrix of max |{f_i, f_j}| over states; symmetric with zero diagonal."""
    if not states:
        raise ValueError("commutation_residual needs at least one state")
    k = len(family)
    out = np.zeros((k, k))
    for state in states:
        grads = [family.structure.gradient(f, state) for f in family.members]
        for i in range(k):
            for j in range(i + 1, k):
                value = abs(family.structure.bracket_from_gradients(grads[i], grads[j], state))
                out[i, j] = out[j, i] = max(out[i, j], value)
    return out


def independence_rank(family: FunctionFamily, states: Sequence, tol: float = RANK_TOLERANCE) -> int:
    """Max over states of the numerical rank of the stacked (restricted) gradient matrix."""
    if not states:
        raise ValueError("independence_rank needs at least one state")
    return max(numerical_rank(family.structure.restricted_gradients(family.members, s), tol) for s in states)


def conservation_drift(model: GeodesicModel, record: TrajectoryRecord) -> Dict[str, float]:
    """Per integral (and H): max_t |F(t) - F(0)| / max(1, |F(0)|)."""
    if len(record) == 0:
        raise ValueError("conservation_drift needs a nonempty record")
    names = ["H"] + [f.name for f in model.integrals]
    drift = {}
    for name in names:
        values = record.energy if name == "H" else record.values(name)
        drift[name] = float(np.max(np.abs(values - values[0])) / max(1.0, abs(values[0])))
    return drift


class CompletenessReport(BaseModel):
    """ddim/dind bookkeeping; ``complete`` iff ddim + dind = phase_dim + poisson_corank."""

    model_config = ConfigDict(frozen=True)

    ddim: int
    dind: int
    phase_dim: int
    poisson_corank: int = 0
    complete: bool
    rank_tolerance: float
    sample_points: int


def _gram_corank(structure: PoissonStructure, grads: np.ndarray, state, tol: float) -> int:
    k = grads.shape[0]
    gram = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            gram[i, j] = structure.bracket_from_gradients(grads[i], grads[j], state)
            gram[j, i] = -gram[i, j]
    scale = max(1.0, float(np.max(np.linalg.norm(grads, axis=1)))) ** 2
    scale *= max(1.0, float(np.linalg.norm(structure.tensor(state), 2)))
    return k - numerical_rank(gram, tol, scale=scale)


def ddim_dind(family: FunctionFamily, states: Sequence, tol: float = RANK_TOLERANCE) -> CompletenessReport:
    """
    ddim: independence rank over the sampled states.
    dind: corank of the Gram matrix {f_i, f_j} on an independent subfamily
    (pivoted QR), at states where the rank is generic; the minimal corank
    over those states is the generic one.
    """
    if not states:
        raise ValueError("ddim_dind needs at least one state")
    structure = family.structure
    ranks = []
    for s in states:
        restricted = structure.restricted_gradients(family.members, s)
        ranks.append(numerical_rank(restricted, tol))
    ddim = max(ranks)
    coranks = []
    poisson_ranks = []
    for s, r in zip(states, ranks):
        poisson_ranks.append(structure.rank(s, tol))
        if r != ddim:
            continue
        full = np.vstack([structure.gradient(f, s) for f in family.members])
        restricted = structure.restricted_gradients(family.members, s)
        _, _, pivots = qr(restricted.T, pivoting=True)
        coranks.append(_gram_corank(structure, full[np.sort(pivots[:ddim])], s, tol))
    dind = min(coranks) if coranks else 0
    corank = structure.phase_dim - max(poisson_ranks)
    complete = ddim + dind == structure.phase_dim + corank
    logger.debug("ddim=%d dind=%d phase_dim=%d corank=%d", ddim, dind, structure.phase_dim, corank)
    return CompletenessReport(
        ddim=ddim,
        dind=dind,
        phase_dim=structure.phase_dim,
        poisson_corank=corank,
        complete=complete,
        rank_tolerance=tol,
        sample_points=len(states),
    )


def _bracket_function(structure: PoissonStructure, g, h) -> Callable[[np.ndarray], float]:
    return lambda z: structure.bracket(g, h, structure.unflatten(z))


def jacobi_residual(f, g, h, state, structure: PoissonStructure) -> float:
    """|{f,{g,h}} + {g,{h,f}} + {h,{f,g}}|; inner brackets differentiated by finite differences."""
    z0 = structure.flatten(state)
    total = 0.0
    for a, b, c in ((f, g, h), (g, h, f), (h, f, g)):
        inner = finite_difference_gradient(_bracket_function(structure, b, c), z0)
        total += structure.bracket_from_gradients(structure.gradient(a, state), inner, state)
    return abs(total)


def tensor_jacobi_residual(structure: PoissonStructure, state) -> float:
    """
    Max entry of the Schouten bracket [Pi, Pi]:
    sum_l Pi_il d_l Pi_jk + Pi_jl d_l Pi_ki + Pi_kl d_l Pi_ij.
    """
    z0 = structure.flatten(state)
    pi = structure.tensor(state)
    m = len(z0)
    dpi = np.zeros((m, m, m))
    for l in range(m):
        step = FD_STEP * max(1.0, abs(z0[l]))
        zp, zm = z0.copy(), z0.copy()
        zp[l] += step
        zm[l] -= step
        dpi[l] = (structure.tensor(structure.unflatten(zp)) - structure.tensor(structure.unflatten(zm))) / (2 * step)
    term = np.einsum("il,ljk->ijk", pi, dpi)
    schouten = term + np.transpose(term, (1, 2, 0)) + np.transpose(term, (2, 0, 1))
    return float(np.max(np.abs(schouten)))


def product_integral(f: FirstIntegral, g: FirstIntegral) -> FirstIntegral:
    return FirstIntegral(f"{f.name}*{g.name}", lambda x, p: f.fn(x, p) * g.fn(x, p), degree="non-polynomial")


def leibniz_residual(f: FirstIntegral, g: FirstIntegral, h: FirstIntegral, s: CotangentState,
                     structure: PoissonStructure) -> float:
    """|{fg, h} - f{g, h} - g{f, h}|."""
    lhs = structure.bracket(product_integral(f, g), h, s)
    rhs = f.eval(s) * structure.bracket(g, h, s) + g.eval(s) * structure.bracket(f, h, s)
    return abs(lhs - rhs)


def family_report(family: FunctionFamily, states: Sequence, seed: Optional[int] = None,
                  tol: float = RANK_TOLERANCE) -> Dict[str, Any]:
    """JSON-ready summary: residual matrix, rank, ddim/dind and tolerances."""
    residual = commutation_residual(family, states)
    completeness = ddim_dind(family, states, tol)
    return {
        "family": family.names,
        "bracket": family.structure.kind,
        "states": len(states),
        "residual_matrix": residual.tolist(),
        "rank": completeness.ddim,
        "ddim": completeness.ddim,
        "dind": completeness.dind,
        "complete": completeness.complete,
        "tolerances": {"rank": tol},
        "seed": seed,
    }
