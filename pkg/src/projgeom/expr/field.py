"""Scalar fields: closed-form functions of chart coordinates."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import nodes
from .compile import compile_exprs
from .errors import DimensionError
from .jets import Jet2, jets_of
from .nodes import Expr
from .parser import parse
from .printer import to_text


class ScalarField:
    """An expression in x0..x{dim-1}.  Immutable; arithmetic builds new fields."""

    __slots__ = ("expr", "dim")

    def __init__(self, expr: Expr, dim: int):
        dim = int(dim)
        if dim < 1:
            raise ValueError("dimension must be positive")
        bad = [i for i in expr.variables if i >= dim]
        if bad:
            raise DimensionError(f"x{max(bad)} out of range for dimension {dim}")
        object.__setattr__(self, "expr", expr)
        object.__setattr__(self, "dim", dim)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    @classmethod
    def parse(cls, text: str, dim: int) -> "ScalarField":
        return cls(parse(str(text), dim), dim)

    @classmethod
    def constant(cls, value: float, dim: int) -> "ScalarField":
        return cls(nodes.as_expr(value), dim)

    @classmethod
    def coordinate(cls, index: int, dim: int) -> "ScalarField":
        return cls(nodes.Var(index), dim)

    @property
    def text(self) -> str:
        return to_text(self.expr)

    @property
    def is_zero(self) -> bool:
        return self.expr is nodes.ZERO

    @property
    def is_constant(self) -> bool:
        return not self.expr.variables

    def __repr__(self) -> str:
        return f"ScalarField({self.text!r}, dim={self.dim})"

    def __str__(self) -> str:
        return self.text

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ScalarField)
            and other.expr is self.expr
            and other.dim == self.dim
        )

    def __hash__(self) -> int:
        return hash((id(self.expr), self.dim))

    # -- evaluation -----------------------------------------------------------

    def __call__(self, point: Sequence[float]) -> float:
        self._check_point(point)
        return compile_exprs((self.expr,))(point)[0]

    def jet(self, point: Sequence[float]) -> Jet2:
        self._check_point(point)
        return jets_of([self.expr], point)[0]

    def _check_point(self, point):
        if len(point) != self.dim:
            raise DimensionError(f"expected a {self.dim}-dim point, got {len(point)}")

    # -- symbolic operations ---------------------------------------------------

    def derive(self, i: int) -> "ScalarField":
        if not 0 <= i < self.dim:
            raise DimensionError(f"no coordinate x{i} in dimension {self.dim}")
        return ScalarField(nodes.derive(self.expr, i), self.dim)

    def substitute(self, mapping: Mapping[int, "ScalarField | Expr"], dim: int | None = None) -> "ScalarField":
        """Replace coordinates by fields; ``dim`` is the dimension of the result."""
        exprs = {k: _expr(v) for k, v in mapping.items()}
        return ScalarField(nodes.substitute(self.expr, exprs), dim or self.dim)

    def compose(self, components: Sequence["ScalarField"]) -> "ScalarField":
        """``self`` evaluated at the point given by ``components``."""
        if len(components) != self.dim:
            raise DimensionError("component count must match field dimension")
        dim = components[0].dim if components else self.dim
        return self.substitute(dict(enumerate(components)), dim)

    def reindex(self, shift: int, dim: int) -> "ScalarField":
        """Rename x_i to x_{i+shift} in a field of dimension ``dim``."""
        mapping = {i: nodes.Var(i + shift) for i in self.expr.variables}
        return ScalarField(nodes.substitute(self.expr, mapping), dim)

    def _coerce(self, other) -> Expr:
        if isinstance(other, ScalarField):
            if other.dim != self.dim:
                raise DimensionError(f"dimension mismatch {self.dim} vs {other.dim}")
            return other.expr
        return nodes.as_expr(other)

    def __add__(self, other):
        return ScalarField(nodes.add(self.expr, self._coerce(other)), self.dim)

    def __radd__(self, other):
        return ScalarField(nodes.add(self._coerce(other), self.expr), self.dim)

    def __sub__(self, other):
        return ScalarField(nodes.sub(self.expr, self._coerce(other)), self.dim)

    def __rsub__(self, other):
        return ScalarField(nodes.sub(self._coerce(other), self.expr), self.dim)

    def __mul__(self, other):
        return ScalarField(nodes.mul(self.expr, self._coerce(other)), self.dim)

    def __rmul__(self, other):
        return ScalarField(nodes.mul(self._coerce(other), self.expr), self.dim)

    def __truediv__(self, other):
        return ScalarField(nodes.div(self.expr, self._coerce(other)), self.dim)

    def __rtruediv__(self, other):
        return ScalarField(nodes.div(self._coerce(other), self.expr), self.dim)

    def __neg__(self):
        return ScalarField(nodes.neg(self.expr), self.dim)

    def __pow__(self, k):
        return ScalarField(nodes.power(self.expr, Fraction(k)), self.dim)

    def apply(self, name: str) -> "ScalarField":
        return ScalarField(nodes.call(name, self.expr), self.dim)


def _expr(v) -> Expr:
    return v.expr if isinstance(v, ScalarField) else nodes.as_expr(v)


def field_sum(fields: Iterable, dim: int) -> ScalarField:
    return ScalarField(nodes.total(_expr(f) for f in fields), dim)


def evaluate_many(fields: Sequence[ScalarField], point: Sequence[float]) -> np.ndarray:
    """Values of several fields at one point, sharing common subexpressions."""
    if not fields:
        return np.zeros(0)
    return np.array(compile_exprs(tuple(f.expr for f in fields))(point), dtype=float)


def jets_many(fields: Sequence[ScalarField], point: Sequence[float], seeds=None) -> list[Jet2]:
    return jets_of([f.expr for f in fields], point, seeds)


def as_field(value, dim: int) -> ScalarField:
    if isinstance(value, ScalarField):
        if value.dim != dim:
            raise DimensionError(f"expected a field of dimension {dim}, got {value.dim}")
        return value
    if isinstance(value, str):
        return ScalarField.parse(value, dim)
    return ScalarField.constant(float(value), dim)
