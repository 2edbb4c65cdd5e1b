"""
Forward-mode automatic differentiation with dual numbers.

A ``Dual`` carries a value and a tangent *vector*, so a single sweep through
a numpy-written function returns the full gradient. Functions written with
the primitives exported here (or with numpy ufuncs on object arrays, which
dispatch to the methods of the same name) are differentiated exactly.
"""

from typing import Callable, Sequence, Union

import numpy as np

Number = Union[int, float, np.number]


class Dual:
    """Value plus tangent vector ``eps``."""

    __slots__ = ("val", "eps")
    # makes numpy scalars and float arrays defer to the reflected operators
    __array_priority__ = 100

    def __init__(self, val, eps):
        self.val = val
        self.eps = eps

    def __repr__(self) -> str:
        return f"Dual({self.val!r}, {self.eps!r})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.eps + other.eps)
        if isinstance(other, np.ndarray):
            return _elementwise(lambda e: self + e, other)
        return Dual(self.val + other, self.eps)

    def __radd__(self, other):
        if isinstance(other, np.ndarray):
            return _elementwise(lambda e: e + self, other)
        return Dual(other + self.val, self.eps)

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.eps - other.eps)
        if isinstance(other, np.ndarray):
            return _elementwise(lambda e: self - e, other)
        return Dual(self.val - other, self.eps)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return _elementwise(lambda e: e - self, other)
        return Dual(other - self.val, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.val * other.eps + other.val * self.eps)
        if isinstance(other, np.ndarray):
            return _elementwise(lambda e: self * e, other)
        return Dual(self.val * other, self.eps * other)

    def __rmul__(self, other):
        if isinstance(other, np.ndarray):
            return _elementwise(lambda e: e * self, other)
        return Dual(other * self.val, self.eps * other)

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            val = self.val * inv
            return Dual(val, (self.eps - val * other.eps) * inv)
        if isinstance(other, np.ndarray):
            return _elementwise(lambda e: self / e, other)
        return Dual(self.val / other, self.eps / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return _elementwise(lambda e: e / self, other)
        val = other / self.val
        return Dual(val, -val / self.val * self.eps)

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __pos__(self):
        return self

    def __abs__(self):
        return Dual(abs(self.val), np.sign(self.val) * self.eps)

    def __pow__(self, power):
        if isinstance(power, Dual):
            return (power * self.log()).exp()
        if isinstance(power, np.ndarray):
            return _elementwise(lambda e: self ** e, power)
        if power == 0:
            return Dual(1.0, 0.0 * self.eps)
        return Dual(self.val ** power, power * self.val ** (power - 1) * self.eps)

    def __rpow__(self, base):
        if isinstance(base, np.ndarray):
            return _elementwise(lambda e: e ** self, base)
        return (self * np.log(base)).exp()

    # comparisons act on values only
    def __lt__(self, other):
        return self.val < value_of(other)

    def __le__(self, other):
        return self.val <= value_of(other)

    def __gt__(self, other):
        return self.val > value_of(other)

    def __ge__(self, other):
        return self.val >= value_of(other)

    # -- registered primitives (names match numpy ufuncs) --------------------

    def sin(self):
        return Dual(np.sin(self.val), np.cos(self.val) * self.eps)

    def cos(self):
        return Dual(np.cos(self.val), -np.sin(self.val) * self.eps)

    def tan(self):
        t = np.tan(self.val)
        return Dual(t, (1.0 + t * t) * self.eps)

    def exp(self):
        e = np.exp(self.val)
        return Dual(e, e * self.eps)

    def log(self):
        return Dual(np.log(self.val), self.eps / self.val)

    def sqrt(self):
        r = np.sqrt(self.val)
        return Dual(r, self.eps / (2.0 * r))

    def arctan(self):
        return Dual(np.arctan(self.val), self.eps / (1.0 + self.val * self.val))

    def tanh(self):
        t = np.tanh(self.val)
        return Dual(t, (1.0 - t * t) * self.eps)

    def sinh(self):
        return Dual(np.sinh(self.val), np.cosh(self.val) * self.eps)

    def cosh(self):
        return Dual(np.cosh(self.val), np.sinh(self.val) * self.eps)

    def absolute(self):
        return abs(self)


def _elementwise(fn: Callable, arr: np.ndarray) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = fn(arr[idx])
    return out


def _primitive(name: str) -> Callable:
    numpy_fn = getattr(np, name)

    def apply(x):
        if isinstance(x, Dual):
            return getattr(x, name)()
        if isinstance(x, np.ndarray) and x.dtype == object:
            return _elementwise(apply, x)
        return numpy_fn(x)

    apply.__name__ = name
    apply.__doc__ = f"Dual-aware ``numpy.{name}``."
    return apply


sin = _primitive("sin")
cos = _primitive("cos")
tan = _primitive("tan")
exp = _primitive("exp")
log = _primitive("log")
sqrt = _primitive("sqrt")
arctan = _primitive("arctan")
tanh = _primitive("tanh")
sinh = _primitive("sinh")
cosh = _primitive("cosh")

REGISTERED_PRIMITIVES = ("sin", "cos", "tan", "exp", "log", "sqrt", "arctan", "tanh", "sinh", "cosh", "abs", "pow")


def value_of(x):
    """Strip tangents: Dual -> float, object array -> float array."""
    if isinstance(x, Dual):
        return x.val
    if isinstance(x, np.ndarray) and x.dtype == object:
        return np.array([value_of(e) for e in x.ravel()], dtype=float).reshape(x.shape)
    return x


def seed_variables(values: Sequence[float], offset: int, total: int) -> np.ndarray:
    """Object array of Duals whose tangents are unit vectors ``e_{offset+i}`` in R^total."""
    values = np.asarray(values, dtype=float)
    out = np.empty(values.shape, dtype=object)
    for i, v in enumerate(values.ravel()):
        eps = np.zeros(total)
        eps[offset + i] = 1.0
        out.flat[i] = Dual(float(v), eps)
    return out


def tangent_of(x, total: int) -> np.ndarray:
    """Gradient carried by a scalar output; constants have zero gradient."""
    if isinstance(x, Dual):
        return np.asarray(x.eps, dtype=float) * np.ones(total)
    if isinstance(x, (int, float, np.number)):
        return np.zeros(total)
    raise TypeError(f"cannot extract a tangent from {type(x).__name__}")


def jacobian_of(outputs, total: int) -> np.ndarray:
    """Rows are tangents of the entries of an output vector."""
    outputs = np.asarray(outputs, dtype=object).ravel()
    return np.vstack([tangent_of(o, total) for o in outputs]) if len(outputs) else np.zeros((0, total))
