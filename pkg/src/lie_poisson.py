"""
Lie-algebraic integrability machinery.

Algebras are realized by real matrices: so(n) directly, u(n) and su(n)
through the realification Z -> [[Re Z, -Im Z], [Im Z, Re Z]]. Points are
coordinate vectors x in a fixed integer basis e_i; the invariant pairing has
Gram matrix P (-1/2 tr for so, -Re tr for u/su), so the gradient of f is
P^-1 df.

Sign convention: {f, g}(x) = <x, [grad f, grad g]>. In the so(3) basis
(E12, E13, E23) this gives {x1, x2} = -x3. The a-bracket keeps the printed
order <a, [grad g, grad f]>, and the bracket on a complement v is
{f, g}_v = -<v, [grad f, grad g]>.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.linalg import eig, null_space

from .autodiff import seed_variables, tangent_of, value_of
from .errors import NonGenericPointError, ParameterError, PreconditionError
from .poisson_verify import RANK_TOLERANCE, FunctionFamily, PoissonStructure, commutation_residual, numerical_rank

logger = logging.getLogger(__name__)

HALF_INTEGER_SNAP = 1e-9
CLOSURE_TOLERANCE = 1e-10


def realify(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.block([[z.real, -z.imag], [z.imag, z.real]])


def _unit(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


# -- invariant polynomials ------------------------------------------------------------

@dataclass(frozen=True)
class PolynomialFunction:
    """
    Polynomial on a coordinate space with an optional closed-form
    differential ``grad_fn``; ``fn`` must accept Dual coordinates.
    """

    name: str
    fn: Callable[[np.ndarray], Any]
    grad_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    degree: int = 2

    def eval(self, x) -> float:
        return float(value_of(self.fn(np.asarray(x, dtype=float))))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x), dtype=float)
        return tangent_of(self.fn(seed_variables(x, 0, len(x))), len(x))


def _pfaffian(m):
    size = m.shape[0]
    if size == 0:
        return 1.0
    total = 0.0
    rest = list(range(1, size))
    for pos, j in enumerate(rest):
        keep = [k for k in rest if k != j]
        minor = m[np.ix_(keep, keep)]
        term = m[0, j] * _pfaffian(minor)
        total = total + term if pos % 2 == 0 else total - term
    return total


@dataclass(frozen=True)
class LieAlgebraModel:
    """
    Finite-dimensional Lie algebra with structure constants
    c[k, i, j] = c^k_ij ([e_i, e_j] = sum_k c^k_ij e_k) and pairing Gram matrix P.
    """

    name: str
    basis: np.ndarray
    c: np.ndarray
    pairing: np.ndarray
    invariants: Tuple[PolynomialFunction, ...] = ()
    kind: str = "matrix"
    complex_unit: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @property
    def pairing_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.pairing)

    def matrix(self, x) -> np.ndarray:
        return np.tensordot(np.asarray(x), self.basis, axes=(0, 0))

    def coords(self, m: np.ndarray) -> np.ndarray:
        flat = self.basis.reshape(self.dim, -1).T
        sol, *_ = np.linalg.lstsq(flat, np.asarray(m, dtype=float).ravel(), rcond=None)
        return sol

    def bracket(self, x, y):
        return np.dot(np.dot(self.c, y), x)

    def ad(self, x) -> np.ndarray:
        """Matrix of y -> [x, y]."""
        return np.tensordot(np.asarray(x, dtype=float), self.c, axes=(0, 1))

    def inner(self, x, y):
        return np.dot(x, np.dot(self.pairing, y))

    def structure_matrix(self, mu, c: Optional[np.ndarray] = None) -> np.ndarray:
        """C(mu)_ij = sum_k mu_k c^k_ij."""
        return np.tensordot(np.asarray(mu, dtype=float), self.c if c is None else c, axes=(0, 0))

    def lie_poisson_tensor(self, x, c: Optional[np.ndarray] = None) -> np.ndarray:
        inv = self.pairing_inverse
        return inv @ self.structure_matrix(self.pairing @ np.asarray(x, dtype=float), c) @ inv

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(size=self.dim)

    def jacobi_defect(self) -> float:
        """Max |c^m_ij c^l_mk + c^m_jk c^l_mi + c^m_ki c^l_mj|."""
        t = np.einsum("mij,lmk->lijk", self.c, self.c)
        total = t + np.transpose(t, (0, 2, 3, 1)) + np.transpose(t, (0, 3, 1, 2))
        return float(np.max(np.abs(total)))

    def antisymmetry_defect(self) -> float:
        return float(np.max(np.abs(self.c + np.transpose(self.c, (0, 2, 1)))))

    def pairing_defect(self, rng: np.random.Generator, trials: int = 20) -> float:
        worst = 0.0
        for _ in range(trials):
            a, b, c = (self.random_point(rng) for _ in range(3))
            value = self.inner(self.bracket(a, b), c) + self.inner(b, self.bracket(a, c))
            worst = max(worst, abs(float(value)))
        return worst

    def generic_corank(self, rng: Optional[np.random.Generator] = None, samples: int = 5) -> int:
        rng = rng or np.random.default_rng(0)
        return self.dim - max(numerical_rank(self.lie_poisson_tensor(self.random_point(rng))) for _ in range(samples))

    def invariant(self, name: str) -> PolynomialFunction:
        for p in self.invariants:
            if p.name == name:
                return p
        raise KeyError(f"{self.name} has no invariant {name!r}")


def _structure_constants(basis: np.ndarray) -> np.ndarray:
    dim = basis.shape[0]
    flat = basis.reshape(dim, -1).T
    c = np.zeros((dim, dim, dim))
    for i in range(dim):
        for j in range(i + 1, dim):
            comm = basis[i] @ basis[j] - basis[j] @ basis[i]
            sol, *_ = np.linalg.lstsq(flat, comm.ravel(), rcond=None)
            c[:, i, j] = sol
            c[:, j, i] = -sol
    snapped = np.round(2.0 * c) / 2.0
    close = np.abs(snapped - c) < HALF_INTEGER_SNAP
    return np.where(close, snapped, c)


def _differential(basis: np.ndarray, m: np.ndarray) -> np.ndarray:
    """d/dx_i of tr(M e_i)-type expressions: entries tr(M basis_i)."""
    return np.tensordot(basis, m.T, axes=([1, 2], [0, 1]))


def _trace_power(basis: np.ndarray, power: int, unit: Optional[np.ndarray], scale: float,
                 name: str, proj: Optional[np.ndarray] = None) -> PolynomialFunction:
    """
    scale * tr((U X)^power) with X = sum x_i e_i (U the complex unit for
    unitary algebras, identity otherwise), optionally precomposed with a
    coordinate projector.
    """
    dim = basis.shape[0]
    size = basis.shape[1]
    u = np.eye(size) if unit is None else unit
    proj = np.eye(dim) if proj is None else proj

    def fn(x):
        m = np.dot(u, np.tensordot(np.dot(proj, x), basis, axes=(0, 0)))
        acc = m
        for _ in range(power - 1):
            acc = np.dot(acc, m)
        return scale * np.trace(acc)

    def grad(x):
        m = u @ np.tensordot(proj @ x, basis, axes=(0, 0))
        acc = np.eye(size)
        for _ in range(power - 1):
            acc = acc @ m
        return proj.T @ (scale * power * _differential(basis, acc @ u))

    return PolynomialFunction(name, fn, grad, degree=power)


def _pfaffian_invariant(basis: np.ndarray, block: int, name: str = "pf",
                        proj: Optional[np.ndarray] = None) -> PolynomialFunction:
    dim = basis.shape[0]
    proj = np.eye(dim) if proj is None else proj

    def fn(x):
        m = np.tensordot(np.dot(proj, x), basis, axes=(0, 0))
        return _pfaffian(m[:block, :block])

    return PolynomialFunction(name, fn, degree=block // 2)


def _so_invariants(basis: np.ndarray, n: int, proj: Optional[np.ndarray] = None,
                   suffix: str = "") -> Tuple[PolynomialFunction, ...]:
    m = n // 2
    gens = [_trace_power(basis, 2, None, -0.5, f"C2{suffix}", proj)]
    top = 2 * m - 2 if n % 2 == 0 else 2 * m
    for k in range(4, top + 1, 2):
        gens.append(_trace_power(basis, k, None, 1.0, f"tr(x^{k}){suffix}", proj))
    if n % 2 == 0 and n >= 4:
        gens.append(_pfaffian_invariant(basis, n, f"pf{suffix}", proj))
    return tuple(gens)


def _u_invariants(basis: np.ndarray, unit: np.ndarray, n: int, start: int = 1,
                  proj: Optional[np.ndarray] = None, suffix: str = "") -> Tuple[PolynomialFunction, ...]:
    # complex trace of a Hermitian matrix = half the real trace of its realification
    return tuple(_trace_power(basis, k, unit, 0.5, f"tr((ix)^{k}){suffix}", proj) for k in range(start, n + 1))


def so_algebra(n: int) -> LieAlgebraModel:
    if n < 2:
        raise ParameterError(f"so(n) needs n >= 2, got {n}", "n")
    mats = []
    for i in range(n):
        for j in range(i + 1, n):
            m = np.zeros((n, n))
            m[i, j], m[j, i] = 1.0, -1.0
            mats.append(m)
    basis = np.array(mats)
    pairing = -0.5 * np.einsum("iab,jba->ij", basis, basis)
    return LieAlgebraModel(f"so({n})", basis, _structure_constants(basis), pairing,
                           _so_invariants(basis, n), kind="so")


def _unitary_basis(n: int, traceless: bool) -> np.ndarray:
    mats = []
    for i in range(n):
        for j in range(i + 1, n):
            mats.append(realify(_unit(n, i, j) - _unit(n, j, i)))
            mats.append(realify(1j * (_unit(n, i, j) + _unit(n, j, i))))
    if traceless:
        for i in range(n - 1):
            mats.append(realify(1j * (_unit(n, i, i) - _unit(n, i + 1, i + 1))))
    else:
        for i in range(n):
            mats.append(realify(1j * _unit(n, i, i)))
    return np.array(mats)


def unitary_algebra(n: int, special: bool = False) -> LieAlgebraModel:
    if n < (2 if special else 1):
        raise ParameterError(f"{'su' if special else 'u'}(n) needs a larger n, got {n}", "n")
    basis = _unitary_basis(n, special)
    unit = realify(1j * np.eye(n))
    # -Re tr_C(XY) = -1/2 tr_R(R(X) R(Y))
    pairing = -0.25 * np.einsum("iab,jba->ij", basis, basis) * 2.0
    invariants = _u_invariants(basis, unit, n, start=2 if special else 1)
    return LieAlgebraModel(f"{'su' if special else 'u'}({n})", basis, _structure_constants(basis), pairing,
                           invariants, kind="su" if special else "u", complex_unit=unit)


def build_algebra(kind: str, n: int) -> LieAlgebraModel:
    """Preset algebras by name: ``so``, ``u``, ``su``."""
    if kind == "so":
        return so_algebra(n)
    if kind == "u":
        return unitary_algebra(n)
    if kind == "su":
        return unitary_algebra(n, special=True)
    raise ParameterError(f"unknown algebra kind {kind!r}", "kind")


def direct_sum(first: LieAlgebraModel, second: LieAlgebraModel) -> LieAlgebraModel:
    """Block-diagonal sum; invariants of each summand act on its own coordinates."""
    d1, d2 = first.dim, second.dim
    s1, s2 = first.basis.shape[1], second.basis.shape[1]
    basis = np.zeros((d1 + d2, s1 + s2, s1 + s2))
    basis[:d1, :s1, :s1] = first.basis
    basis[d1:, s1:, s1:] = second.basis
    pairing = np.zeros((d1 + d2, d1 + d2))
    pairing[:d1, :d1] = first.pairing
    pairing[d1:, d1:] = second.pairing

    def lift(p: PolynomialFunction, lo: int, hi: int, tag: str) -> PolynomialFunction:
        def fn(x):
            return p.fn(x[lo:hi])

        def grad(x):
            out = np.zeros(d1 + d2)
            out[lo:hi] = p.gradient(x[lo:hi])
            return out

        return PolynomialFunction(f"{p.name}[{tag}]", fn, grad, p.degree)

    invariants = tuple(lift(p, 0, d1, "1") for p in first.invariants) + tuple(
        lift(p, d1, d1 + d2, "2") for p in second.invariants)
    return LieAlgebraModel(f"{first.name}+{second.name}", basis, _structure_constants(basis), pairing,
                           invariants, kind="sum")


# -- Poisson structures ----------------------------------------------------------------

class LiePoissonStructure(PoissonStructure):
    """{f, g}(x) = <x, [grad f, grad g]> on algebra coordinates."""

    kind = "lie_poisson"

    def __init__(self, algebra: LieAlgebraModel, c: Optional[np.ndarray] = None):
        super().__init__(algebra.dim)
        self.algebra = algebra
        self.c = c

    def tensor(self, x) -> np.ndarray:
        return self.algebra.lie_poisson_tensor(x, self.c)


class ShiftStructure(PoissonStructure):
    """a-bracket <a, [grad g, grad f]>: a constant tensor."""

    kind = "a_bracket"

    def __init__(self, algebra: LieAlgebraModel, a):
        super().__init__(algebra.dim)
        self.algebra = algebra
        self.a = np.asarray(a, dtype=float)
        self._tensor = -algebra.lie_poisson_tensor(self.a)

    def tensor(self, x) -> np.ndarray:
        return self._tensor


class PencilMember(PoissonStructure):
    """alpha Pi_1 + beta Pi_2."""

    def __init__(self, first: PoissonStructure, second: PoissonStructure, alpha: float, beta: float):
        super().__init__(first.phase_dim)
        self.first, self.second = first, second
        self.alpha, self.beta = alpha, beta
        self.kind = f"{alpha:g}*{first.kind}+{beta:g}*{second.kind}"

    def tensor(self, x) -> np.ndarray:
        return self.alpha * self.first.tensor(x) + self.beta * self.second.tensor(x)


def lie_poisson_bracket(f: PolynomialFunction, g: PolynomialFunction, x, algebra: LieAlgebraModel) -> float:
    return LiePoissonStructure(algebra).bracket(f, g, np.asarray(x, dtype=float))


def coordinate_function(algebra_dim: int, i: int, name: Optional[str] = None) -> PolynomialFunction:
    e = np.zeros(algebra_dim)
    e[i] = 1.0
    return PolynomialFunction(name or f"x{i + 1}", lambda x: x[i], lambda x: e, degree=1)


def linear_function(w, name: str) -> PolynomialFunction:
    w = np.asarray(w, dtype=float)
    return PolynomialFunction(name, lambda x: np.dot(w, x), lambda x: w, degree=1)


# -- decompositions ---------------------------------------------------------------------

def _span_projector(algebra: LieAlgebraModel, vectors: np.ndarray) -> np.ndarray:
    """Pairing-orthogonal projector onto the span of the rows of ``vectors``."""
    s = np.asarray(vectors, dtype=float).reshape(-1, algebra.dim).T
    if s.shape[1] == 0:
        return np.zeros((algebra.dim, algebra.dim))
    p = algebra.pairing
    return s @ np.linalg.solve(s.T @ p @ s, s.T @ p)


class ReductiveDecomposition:
    """
    g = h + v, v the pairing-orthogonal complement of the subalgebra h.

    With ``symmetric`` the pair (g, l = h) is checked for
    [l, l] in l, [l, w] in w, [w, w] in l (w = v).
    """

    def __init__(self, algebra: LieAlgebraModel, h_basis, symmetric: bool = False,
                 v_basis: Optional[np.ndarray] = None, name: str = ""):
        self.algebra = algebra
        self.h_basis = np.asarray(h_basis, dtype=float).reshape(-1, algebra.dim)
        self.symmetric = symmetric
        self.name = name or f"({algebra.name}, h dim {len(self.h_basis)})"
        self.proj_h = _span_projector(algebra, self.h_basis)
        self.proj_v = np.eye(algebra.dim) - self.proj_h
        if v_basis is None:
            v_basis = null_space(self.h_basis @ algebra.pairing).T if len(self.h_basis) else np.eye(algebra.dim)
        self.v_basis = np.asarray(v_basis, dtype=float)
        self._check()

    @property
    def dim_v(self) -> int:
        return len(self.v_basis)

    @property
    def V(self) -> np.ndarray:
        """Columns span v."""
        return self.v_basis.T

    def _in_span(self, vector: np.ndarray, proj: np.ndarray) -> bool:
        scale = max(1.0, float(np.linalg.norm(vector)))
        return float(np.linalg.norm(vector - proj @ vector)) <= CLOSURE_TOLERANCE * scale

    def _check(self) -> None:
        alg = self.algebra
        cross = self.h_basis @ alg.pairing @ self.V
        if cross.size and np.max(np.abs(cross)) > CLOSURE_TOLERANCE:
            raise PreconditionError("complement is not orthogonal to h")
        for a in self.h_basis:
            for b in self.h_basis:
                if not self._in_span(alg.bracket(a, b), self.proj_h):
                    raise PreconditionError(f"h is not closed under the bracket in {alg.name}")
        if not self.symmetric:
            return
        for a in self.h_basis:
            for w in self.v_basis:
                if not self._in_span(alg.bracket(a, w), self.proj_v):
                    raise PreconditionError("symmetric pair relation [l, w] in w fails")
        for u in self.v_basis:
            for w in self.v_basis:
                if not self._in_span(alg.bracket(u, w), self.proj_h):
                    raise PreconditionError("symmetric pair relation [w, w] in l fails")

    def embed(self, y) -> np.ndarray:
        return np.dot(self.V, y)

    def random_v(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(size=self.dim_v)

    def rotated(self, rng: np.random.Generator) -> "ReductiveDecomposition":
        """Same decomposition with a randomly rotated basis of v."""
        q, _ = np.linalg.qr(rng.normal(size=(self.dim_v, self.dim_v)))
        return ReductiveDecomposition(self.algebra, self.h_basis, self.symmetric, (self.V @ q).T, self.name)

    def theta_constants(self) -> np.ndarray:
        """Structure constants of [., .]_theta: the w x w part of the bracket removed."""
        pw = self.proj_v
        return self.algebra.c - np.einsum("kab,ai,bj->kij", self.algebra.c, pw, pw)

    def restrict(self, p: PolynomialFunction, name: Optional[str] = None) -> PolynomialFunction:
        """p restricted to v, as a function of v-coordinates y."""
        V = self.V
        return PolynomialFunction(name or p.name, lambda y: p.fn(np.dot(V, y)),
                                  lambda y: V.T @ p.gradient(V @ y), p.degree)


class RestrictedStructure(PoissonStructure):
    """{f, g}_v = -<v, [grad f, grad g]> in v-coordinates."""

    kind = "restricted"

    def __init__(self, decomposition: ReductiveDecomposition):
        super().__init__(decomposition.dim_v)
        self.decomposition = decomposition
        alg = decomposition.algebra
        V = decomposition.V
        self._q_inv = np.linalg.inv(V.T @ alg.pairing @ V)

    def tensor(self, y) -> np.ndarray:
        alg = self.decomposition.algebra
        V = self.decomposition.V
        mu = alg.pairing @ (V @ np.asarray(y, dtype=float))
        return -self._q_inv @ V.T @ alg.structure_matrix(mu) @ V @ self._q_inv


class ThetaStructure(LiePoissonStructure):
    """Lie-Poisson bracket of the contraction [., .]_theta (w commutative)."""

    kind = "theta_bracket"

    def __init__(self, decomposition: ReductiveDecomposition):
        if not decomposition.symmetric:
            raise PreconditionError("theta-bracket needs a symmetric decomposition")
        super().__init__(decomposition.algebra, decomposition.theta_constants())


def modified_bracket(kind: str, f: PolynomialFunction, g: PolynomialFunction, x,
                     algebra: Optional[LieAlgebraModel] = None, a=None,
                     decomposition: Optional[ReductiveDecomposition] = None) -> float:
    """``kind`` is ``a_bracket`` (needs algebra and a) or ``theta_bracket`` (needs a symmetric decomposition)."""
    if kind == "a_bracket":
        if algebra is None or a is None:
            raise ParameterError("a_bracket needs the algebra and a", "a")
        structure: PoissonStructure = ShiftStructure(algebra, a)
    elif kind == "theta_bracket":
        if decomposition is None:
            raise ParameterError("theta_bracket needs a decomposition", "decomposition")
        structure = ThetaStructure(decomposition)
    else:
        raise ParameterError(f"unknown bracket kind {kind!r}", "kind")
    return structure.bracket(f, g, np.asarray(x, dtype=float))


# -- families ---------------------------------------------------------------------------

@dataclass
class PolynomialFamily:
    members: List[PolynomialFunction]
    provenance: str
    space: str = "g"
    details: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def names(self) -> List[str]:
        return [m.name for m in self.members]

    def as_function_family(self, structure: PoissonStructure) -> FunctionFamily:
        return FunctionFamily(self.members, structure, name=self.provenance)

    def metadata(self, structure: Optional[PoissonStructure] = None, points: Sequence = ()) -> Dict[str, Any]:
        """JSON-ready description; residual summary when a structure and points are given."""
        out = {"provenance": self.provenance, "space": self.space, "members": self.names,
               "member_count": len(self.members), **self.details}
        if structure is not None and len(points) and len(self.members) > 1:
            residual = commutation_residual(self.as_function_family(structure), list(points))
            out["max_commutation_residual"] = float(residual.max())
            out["points"] = len(points)
        return out


def _chebyshev_nodes(degree: int) -> np.ndarray:
    k = np.arange(degree + 1)
    return np.cos(np.pi * (k + 0.5) / (degree + 1))


def _coefficient_weights(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and inverse Vandermonde: coefficient j = sum_m W[j, m] p(node_m)."""
    nodes = _chebyshev_nodes(degree)
    vander = np.vander(nodes, degree + 1, increasing=True)
    return nodes, np.linalg.inv(vander)


def _shift_coefficient(p: PolynomialFunction, a: np.ndarray, j: int) -> PolynomialFunction:
    nodes, weights = _coefficient_weights(p.degree)

    def fn(x):
        return sum(weights[j, m] * p.fn(x + nodes[m] * a) for m in range(len(nodes)))

    def grad(x):
        return sum(weights[j, m] * p.gradient(x + nodes[m] * a) for m in range(len(nodes)))

    return PolynomialFunction(f"{p.name}|lambda^{j}", fn, grad, degree=p.degree - j)


def argument_shift_family(algebra: LieAlgebraModel, a, degree_cap: Optional[int] = None) -> PolynomialFamily:
    """
    Coefficients of p(x + lambda a) in lambda for every invariant generator p;
    the constant top coefficient p(a) is dropped.
    """
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise ParameterError("argument shift needs a != 0", "a")
    members = []
    for p in algebra.invariants:
        top = p.degree - 1 if degree_cap is None else min(p.degree - 1, degree_cap)
        members.extend(_shift_coefficient(p, a, j) for j in range(top + 1))
    return PolynomialFamily(members, f"argument_shift({algebra.name})", details={"a": a.tolist()})


def leaf_rank(family: PolynomialFamily, x, algebra: LieAlgebraModel, tol: float = RANK_TOLERANCE) -> int:
    """Rank of the family's differentials restricted to the coadjoint orbit through x."""
    pi = algebra.lie_poisson_tensor(x)
    u, sv, _ = np.linalg.svd(pi)
    tangent = u[:, sv > tol * sv[0]]
    grads = np.vstack([m.gradient(x) for m in family.members])
    return numerical_rank(grads @ tangent, tol)


class PencilReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    complete: bool
    generic_rank: int
    base_rank: int
    sampled: int
    min_sampled_rank: int
    drops: List[Tuple[float, float]]
    degenerate_members: List[Tuple[float, float]]
    infinite_member_drops: bool


def default_lambda_samples() -> np.ndarray:
    angles = 2 * np.pi * (np.arange(16) + 0.37) / 16
    circles = np.concatenate([0.5 * np.exp(1j * angles), 2.0 * np.exp(1j * angles)])
    reals = np.array([-3.1, -1.7, -0.9, -0.3, 0.35, 1.1, 1.9, 3.3], dtype=complex)
    return np.concatenate([circles, reals])


def pencil_completeness_check(first: PoissonStructure, second: PoissonStructure, x,
                              lambdas: Optional[Sequence[complex]] = None, tol: float = RANK_TOLERANCE,
                              generic_rank: Optional[int] = None, seed: int = 0) -> PencilReport:
    """
    Rank of Pi_1(x) + lambda Pi_2(x) over complex lambda (and Pi_2 alone).

    Sampled lambdas are complemented by the exact drop locus: eigenvalues of
    the pencil projected to r x r by random matrices, each verified by SVD
    of the full member. Identically zero members (proportional pencils) are
    reported separately and do not count as drops.

    Raises:
        NonGenericPointError: rank Pi_1(x) is below the generic rank
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    pi1, pi2 = first.tensor(x), second.tensor(x)
    dim = pi1.shape[0]
    if generic_rank is None:
        generic_rank = max(numerical_rank(first.tensor(rng.normal(size=x.shape)), tol) for _ in range(10))
    base_rank = numerical_rank(pi1, tol)
    if base_rank < generic_rank:
        raise NonGenericPointError(f"rank of the reference bracket at x is {base_rank} < generic {generic_rank}",
                                   {"x": x.tolist()})
    scale = max(np.linalg.norm(pi1, 2), np.linalg.norm(pi2, 2))

    def member_rank(lam: complex) -> Tuple[int, bool]:
        m = pi1 + lam * pi2
        if np.linalg.norm(m, 2) <= tol * scale:
            return 0, True
        return numerical_rank(m, tol, scale=0.0), False

    samples = np.asarray(default_lambda_samples() if lambdas is None else lambdas, dtype=complex)
    drops: List[complex] = []
    degenerate: List[complex] = []
    ranks = []
    for lam in samples:
        r, zero = member_rank(lam)
        if zero:
            degenerate.append(lam)
            continue
        ranks.append(r)
        if r < generic_rank:
            drops.append(lam)

    r = generic_rank
    if r > 0:
        u = rng.normal(size=(dim, r))
        v = rng.normal(size=(dim, r))
        candidates = eig(u.T @ pi1 @ v, -(u.T @ pi2 @ v), right=False)
        for lam in candidates:
            if not np.isfinite(lam):
                continue
            rank, zero = member_rank(lam)
            if zero:
                if not any(abs(lam - d) < 1e-8 * max(1.0, abs(d)) for d in degenerate):
                    degenerate.append(lam)
            elif rank < generic_rank and not any(abs(lam - d) < 1e-8 * max(1.0, abs(d)) for d in drops):
                drops.append(lam)
    infinite = np.linalg.norm(pi2, 2) > tol * scale and numerical_rank(pi2, tol) < generic_rank
    complete = not drops and not infinite
    if not complete:
        logger.info("pencil rank drops at %s (infinite member drop: %s)", drops, infinite)
    return PencilReport(
        complete=complete,
        generic_rank=generic_rank,
        base_rank=base_rank,
        sampled=len(samples),
        min_sampled_rank=min(ranks) if ranks else 0,
        drops=[(float(np.real(d)), float(np.imag(d))) for d in drops],
        degenerate_members=[(float(np.real(d)), float(np.imag(d))) for d in degenerate],
        infinite_member_drops=bool(infinite),
    )


def _ann_dims(decomposition: ReductiveDecomposition, v_full: np.ndarray, tol: float) -> Tuple[int, int]:
    alg = decomposition.algebra
    ad_v = alg.ad(v_full)
    ann_g = alg.dim - numerical_rank(ad_v, tol)
    h = decomposition.h_basis
    ann_h = len(h) - numerical_rank(ad_v @ h.T, tol) if len(h) else 0
    return ann_g, ann_h


class VCompletenessReport(BaseModel):
    """Completeness of a commutative family on v: ddim = dim v - 1/2 dim O_G(v)."""

    model_config = ConfigDict(frozen=True)

    dim_v: int
    dim_ann_g: int
    dim_ann_h: int
    orbit_dim: int
    required_ddim: float
    ddim: int
    complete: bool
    invariant_ddim: int
    invariant_dind: int
    generic_samples: int
    nongeneric_warning: bool
    rank_tolerance: float


def completeness_on_v(decomposition: ReductiveDecomposition, family: PolynomialFamily, v_samples: Sequence,
                      tol: float = RANK_TOLERANCE, seed: int = 0) -> VCompletenessReport:
    """
    Annihilator dimensions, orbit dimension and the completeness verdict of a
    family on v. Samples whose annihilators are not minimal are excluded;
    ``nongeneric_warning`` is set when no sample reaches the minimal
    dimensions seen on fresh random points of v.
    """
    alg = decomposition.algebra
    dims = [_ann_dims(decomposition, decomposition.embed(y), tol) for y in v_samples]
    rng = np.random.default_rng(seed)
    reference = [_ann_dims(decomposition, decomposition.embed(decomposition.random_v(rng)), tol) for _ in range(20)]
    min_g = min(d[0] for d in dims + reference)
    min_h = min(d[1] for d in dims + reference)
    generic = [y for y, d in zip(v_samples, dims) if d == (min_g, min_h)]
    warning = not generic
    if warning:
        logger.warning("no generic v among %d samples of %s", len(v_samples), decomposition.name)
        generic = list(v_samples)
    grads_rank = max(
        numerical_rank(np.vstack([m.gradient(y) for m in family.members]), tol) for y in generic
    ) if family.members else 0
    orbit_dim = alg.dim - min_g
    required = decomposition.dim_v - 0.5 * orbit_dim
    dim_h = len(decomposition.h_basis)
    return VCompletenessReport(
        dim_v=decomposition.dim_v,
        dim_ann_g=min_g,
        dim_ann_h=min_h,
        orbit_dim=orbit_dim,
        required_ddim=required,
        ddim=grads_rank,
        complete=bool(grads_rank == required),
        invariant_ddim=decomposition.dim_v - dim_h + min_h,
        invariant_dind=min_g - min_h,
        generic_samples=len(generic),
        nongeneric_warning=warning,
        rank_tolerance=tol,
    )


# -- presets on v -----------------------------------------------------------------------

def _restricted_shift(decomposition: ReductiveDecomposition, a) -> PolynomialFamily:
    alg = decomposition.algebra
    a = np.asarray(a, dtype=float)
    for h in decomposition.h_basis:
        if np.linalg.norm(alg.bracket(h, a)) > CLOSURE_TOLERANCE * max(1.0, np.linalg.norm(a)):
            raise PreconditionError("h is not contained in ann_g(a)", {"a": a.tolist()})
    shift = argument_shift_family(alg, a)
    members = [decomposition.restrict(m) for m in shift.members]
    return PolynomialFamily(members, f"shift({alg.name})", "v", {"a": a.tolist()})


def block_chain(algebra: LieAlgebraModel, sizes: Sequence[int]) -> List[Tuple[np.ndarray, Tuple[PolynomialFunction, ...]]]:
    """
    Nested top-left block subalgebras of so(n)/u(n) with the invariants of
    each block precomposed with the projector onto it.
    """
    n = algebra.basis.shape[1] // (2 if algebra.kind in ("u", "su") else 1)
    chain = []
    for k in sizes:
        if algebra.kind == "so":
            sub = so_algebra(k)
            embedded = np.zeros((sub.dim, n, n))
            embedded[:, :k, :k] = sub.basis
        elif algebra.kind == "u":
            sub = unitary_algebra(k)
            embedded = np.zeros((sub.dim, 2 * n, 2 * n))
            rows = list(range(k)) + list(range(n, n + k))
            for idx, m in enumerate(sub.basis):
                embedded[idx][np.ix_(rows, rows)] = m
        else:
            raise ParameterError(f"block chains need so(n) or u(n), got {algebra.name}", "algebra")
        vectors = np.array([algebra.coords(m) for m in embedded])
        proj = _span_projector(algebra, vectors)
        if algebra.kind == "so":
            invariants = _so_block_invariants(algebra.basis, k, proj)
        else:
            invariants = _u_invariants(algebra.basis, algebra.complex_unit, k, proj=proj, suffix=f"@{k}")
        chain.append((vectors, invariants))
    return chain


def _so_block_invariants(basis: np.ndarray, k: int, proj: np.ndarray) -> Tuple[PolynomialFunction, ...]:
    m = k // 2
    gens = [_trace_power(basis, 2, None, -0.5, f"C2@{k}", proj)] if k >= 2 else []
    top = 2 * m - 2 if k % 2 == 0 else 2 * m
    for p in range(4, top + 1, 2):
        gens.append(_trace_power(basis, p, None, 1.0, f"tr(x^{p})@{k}", proj))
    if k % 2 == 0 and k >= 4:
        gens.append(_pfaffian_invariant(basis, k, f"pf@{k}", proj))
    return tuple(gens)


def _chain_family(decomposition: ReductiveDecomposition, chain) -> PolynomialFamily:
    members = []
    for _, invariants in chain:
        members.extend(decomposition.restrict(p) for p in invariants)
    return PolynomialFamily(members, f"chain({decomposition.algebra.name})", "v",
                            {"subalgebra_dims": [len(vectors) for vectors, _ in chain]})


def aloff_wallach(k: int = 1, l: int = 2) -> Tuple[ReductiveDecomposition, PolynomialFamily]:
    """
    su(3) with h = t_{k,l} = i diag(k, l, -(k+l)) and the family
    f1 = a + b, f2 = <v1, v1>, f3 = <v, v>, f4 = tr((iv)^3), v1 the part of v
    in s(u(2) + u(1)).

    For k = l the diagonal part of v has a + b = 0, so f1 vanishes on v.
    """
    if k == 0 and l == 0:
        raise ParameterError("need |k| + |l| != 0", "k,l")
    alg = unitary_algebra(3, special=True)
    t = realify(1j * np.diag([k, l, -(k + l)]).astype(complex))
    decomposition = ReductiveDecomposition(alg, alg.coords(t)[None, :], name=f"aloff_wallach({k},{l})")
    block = [
        realify(_unit(3, 0, 1) - _unit(3, 1, 0)),
        realify(1j * (_unit(3, 0, 1) + _unit(3, 1, 0))),
        realify(1j * (_unit(3, 0, 0) - _unit(3, 2, 2))),
        realify(1j * (_unit(3, 1, 1) - _unit(3, 2, 2))),
    ]
    proj_g1 = _span_projector(alg, np.array([alg.coords(m) for m in block]))

    def f1(x):
        # entry (3,3) of v is -i(a + b)
        return -alg.matrix(x)[5, 2]

    def f2(x):
        v1 = np.dot(proj_g1, x)
        return alg.inner(v1, v1)

    def f3(x):
        return alg.inner(x, x)

    generators = [
        PolynomialFunction("f1", f1, degree=1),
        PolynomialFunction("f2", f2, degree=2),
        PolynomialFunction("f3", f3, degree=2),
        PolynomialFunction("f4", alg.invariant("tr((ix)^3)").fn, alg.invariant("tr((ix)^3)").grad_fn, degree=3),
    ]
    members = [decomposition.restrict(p) for p in generators]
    family = PolynomialFamily(members, f"aloff_wallach({k},{l})", "v", {"k": k, "l": l})
    return decomposition, family


def restricted_invariant_family(decomposition: ReductiveDecomposition, preset: str, **options) -> PolynomialFamily:
    """
    Ad_H-invariant families on v.

    Presets: ``shift`` (option ``a``; h must annihilate a), ``chain``
    (option ``sizes`` for nested blocks, or ``chain`` as built by
    ``block_chain``), ``symmetric_pair`` (option ``inner``, a list of
    functions on g depending on the l-part only) and ``aloff_wallach``
    (options ``k``, ``l``; the decomposition argument is ignored and rebuilt).
    """
    if preset == "shift":
        return _restricted_shift(decomposition, options["a"])
    if preset == "chain":
        chain = options.get("chain") or block_chain(decomposition.algebra, options["sizes"])
        return _chain_family(decomposition, chain)
    if preset == "symmetric_pair":
        family = symmetric_pair_family(decomposition, options.get("inner", []))
        members = [decomposition.restrict(m) for m in family.members]
        return PolynomialFamily(members, family.provenance, "v", family.details)
    if preset == "aloff_wallach":
        return aloff_wallach(options.get("k", 1), options.get("l", 2))[1]
    raise ParameterError(f"unknown preset {preset!r}", "preset")


def symmetric_pair_member(decomposition: ReductiveDecomposition, p: PolynomialFunction, lam: float) -> PolynomialFunction:
    """x = l + w  ->  p(lam l + w)."""
    mix = lam * decomposition.proj_h + decomposition.proj_v
    return PolynomialFunction(f"{p.name}(lambda={lam:g})", lambda x: p.fn(np.dot(mix, x)),
                              lambda x: mix.T @ p.gradient(mix @ x), p.degree)


def _is_identically_zero(p: PolynomialFunction, dim: int, rng: np.random.Generator) -> bool:
    return all(abs(p.eval(rng.normal(size=dim))) < 1e-13 for _ in range(3))


def symmetric_pair_family(decomposition: ReductiveDecomposition,
                          inner_family: Sequence[PolynomialFunction]) -> PolynomialFamily:
    """
    lambda-coefficients of p(lambda l + w) for every invariant p of g, plus a
    commutative family on l (functions of the l-part). Coefficients that
    vanish identically are dropped.
    """
    if not decomposition.symmetric:
        raise PreconditionError("symmetric_pair_family needs a symmetric decomposition")
    alg = decomposition.algebra
    rng = np.random.default_rng(0)
    members = []
    for p in alg.invariants:
        nodes, weights = _coefficient_weights(p.degree)
        mixes = [lam * decomposition.proj_h + decomposition.proj_v for lam in nodes]
        for j in range(p.degree + 1):
            def fn(x, j=j, p=p, mixes=mixes, weights=weights):
                return sum(weights[j, m] * p.fn(np.dot(mixes[m], x)) for m in range(len(mixes)))

            def grad(x, j=j, p=p, mixes=mixes, weights=weights):
                return sum(weights[j, m] * (mixes[m].T @ p.gradient(mixes[m] @ x)) for m in range(len(mixes)))

            coefficient = PolynomialFunction(f"{p.name}|lambda^{j}", fn, grad, p.degree)
            if not _is_identically_zero(coefficient, alg.dim, rng):
                members.append(coefficient)
    members.extend(inner_family)
    return PolynomialFamily(members, f"symmetric_pair({decomposition.name})",
                            details={"inner": [m.name for m in inner_family]})
