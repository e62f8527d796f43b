"""Second-order forward-mode jets (truncated Taylor algebra).

A :class:`Jet2` carries a value together with its gradient and Hessian with
respect to a fixed set of seed directions.  The arithmetic below is the
truncated product of second-order Taylor polynomials, so the Leibniz rule
holds by construction and Hessians stay exactly symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError
from .nodes import Add, Call, Const, Div, Expr, Mul, Neg, Pow, Sub, Var, postorder


@dataclass(frozen=True)
class Jet2:
    value: float
    grad: np.ndarray
    hess: np.ndarray

    @property
    def dim(self) -> int:
        return self.grad.shape[0]

    @classmethod
    def constant(cls, value: float, dim: int) -> "Jet2":
        return cls(float(value), np.zeros(dim), np.zeros((dim, dim)))

    @classmethod
    def variable(cls, value: float, index: int, dim: int) -> "Jet2":
        g = np.zeros(dim)
        g[index] = 1.0
        return cls(float(value), g, np.zeros((dim, dim)))

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hess)

    def __mul__(self, other: "Jet2") -> "Jet2":
        a, b = self, other
        cross = np.outer(a.grad, b.grad)
        return Jet2(
            a.value * b.value,
            a.value * b.grad + b.value * a.grad,
            a.value * b.hess + b.value * a.hess + (cross + cross.T),
        )

    def __truediv__(self, other: "Jet2") -> "Jet2":
        return self * other.reciprocal()

    def compose(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Chain rule for a scalar function with derivatives f0, f1, f2 at value."""
        g = self.grad
        return Jet2(f0, f1 * g, f1 * self.hess + f2 * np.outer(g, g))

    def reciprocal(self) -> "Jet2":
        v = self.value
        if v == 0.0:
            raise DomainError("division by zero")
        return self.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))

    def power(self, k: Fraction) -> "Jet2":
        v = self.value
        if k.denominator == 1:
            n = int(k)
            if v == 0.0 and n < 0:
                raise DomainError("division by zero")
            if v == 0.0:
                # avoid 0.0 ** negative in the derivative factors
                f1 = n * v ** (n - 1) if n >= 1 else 0.0
                f2 = n * (n - 1) * v ** (n - 2) if n >= 2 else 0.0
                return self.compose(v**n, f1, f2)
            return self.compose(v**n, n * v ** (n - 1), n * (n - 1) * v ** (n - 2))
        if v <= 0.0:
            raise DomainError(f"fractional power of non-positive base {v!r}")
        kf = float(k)
        return self.compose(v**kf, kf * v ** (kf - 1), kf * (kf - 1) * v ** (kf - 2))

    def log(self) -> "Jet2":
        v = self.value
        if v <= 0.0:
            raise DomainError(f"log of non-positive value {v!r}")
        # divide rather than multiply by 1/v: keeps t * d(log t)/dt == 1 exact
        g = self.grad / v
        return Jet2(math.log(v), g, self.hess / v - np.outer(g, g))


def _apply_call(name: str, a: Jet2) -> Jet2:
    v = a.value
    try:
        if name == "sin":
            s, c = math.sin(v), math.cos(v)
            return a.compose(s, c, -s)
        if name == "cos":
            s, c = math.sin(v), math.cos(v)
            return a.compose(c, -s, -c)
        if name == "exp":
            e = math.exp(v)
            return a.compose(e, e, e)
        if name == "log":
            return a.log()
        if name == "sqrt":
            if v <= 0.0:
                raise DomainError(f"sqrt jet at non-positive value {v!r}")
            r = math.sqrt(v)
            return a.compose(r, 0.5 / r, -0.25 / (r * v))
        if name == "atan":
            d = 1.0 + v * v
            return a.compose(math.atan(v), 1.0 / d, -2.0 * v / (d * d))
    except OverflowError as exc:
        raise DomainError("floating-point overflow") from exc
    raise ValueError(f"unknown function {name!r}")


def jets_of(
    roots: Sequence[Expr],
    point: Sequence[float],
    seeds: np.ndarray | None = None,
) -> list[Jet2]:
    """Evaluate ``roots`` to jets at ``point``.

    ``seeds`` is an (n_vars, d) matrix giving the first-order jet of each input
    variable; by default the identity, i.e. derivatives with respect to the
    coordinates themselves.
    """
    point = [float(v) for v in point]
    n = len(point)
    if seeds is None:
        seeds = np.eye(n)
    seeds = np.asarray(seeds, dtype=float)
    d = seeds.shape[1]
    zero_h = np.zeros((d, d))
    done: dict[int, Jet2] = {}
    for node in postorder(list(roots)):
        if isinstance(node, Const):
            j = Jet2(node.value, np.zeros(d), zero_h)
        elif isinstance(node, Var):
            if node.index >= n:
                raise IndexError(f"x{node.index} not available at a {n}-dim point")
            j = Jet2(point[node.index], seeds[node.index].copy(), zero_h)
        elif isinstance(node, Add):
            j = done[id(node.left)] + done[id(node.right)]
        elif isinstance(node, Sub):
            j = done[id(node.left)] - done[id(node.right)]
        elif isinstance(node, Mul):
            j = done[id(node.left)] * done[id(node.right)]
        elif isinstance(node, Div):
            j = done[id(node.left)] / done[id(node.right)]
        elif isinstance(node, Neg):
            j = -done[id(node.arg)]
        elif isinstance(node, Pow):
            j = done[id(node.base)].power(node.exponent)
        elif isinstance(node, Call):
            j = _apply_call(node.name, done[id(node.arg)])
        else:  # pragma: no cover
            raise TypeError(type(node).__name__)
        done[id(node)] = j
    return [done[id(r)] for r in roots]
