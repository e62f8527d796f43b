"""Expression language, parser and forward-mode jets."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    ExprError,
    ExprSyntaxError,
    UnknownIdentifierError,
)
from .field import ScalarField, as_field, evaluate_many, field_sum, jets_many
from .jets import Jet2
from .nodes import Expr

__all__ = [
    "DimensionError",
    "DomainError",
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "Jet2",
    "ScalarField",
    "UnknownIdentifierError",
    "as_field",
    "derive",
    "eval_jet",
    "evaluate_many",
    "fd_crosscheck",
    "fd_derivatives",
    "field_sum",
    "jets_many",
    "parse",
]


def parse(text: str, dim: int) -> ScalarField:
    """Parse ``text`` into a field over x0..x{dim-1}."""
    return ScalarField.parse(text, dim)


def eval_jet(f: ScalarField, point: Sequence[float]) -> Jet2:
    """Exact value, gradient and Hessian of ``f`` at ``point``."""
    return f.jet(point)


def derive(f: ScalarField, i: int) -> ScalarField:
    return f.derive(i)


def fd_derivatives(f: ScalarField, point: Sequence[float], h: float) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient and Hessian of ``f`` with step ``h``."""
    p = np.asarray(point, dtype=float)
    n = p.size
    e = np.eye(n) * h
    f0 = f(p)
    grad = np.empty(n)
    hess = np.empty((n, n))
    for i in range(n):
        fp, fm = f(p + e[i]), f(p - e[i])
        grad[i] = (fp - fm) / (2 * h)
        hess[i, i] = (fp - 2 * f0 + fm) / (h * h)
        for j in range(i):
            mixed = (
                f(p + e[i] + e[j]) - f(p + e[i] - e[j]) - f(p - e[i] + e[j]) + f(p - e[i] - e[j])
            ) / (4 * h * h)
            hess[i, j] = hess[j, i] = mixed
    return grad, hess


def fd_crosscheck(f: ScalarField, point: Sequence[float], h: float = 1e-4) -> float:
    """Largest absolute gap between jet derivatives and central differences.

    Raises :class:`DomainError` when the stencil leaves the domain of ``f``.
    """
    jet = f.jet(point)
    grad, hess = fd_derivatives(f, point, h)
    return float(max(np.max(np.abs(jet.grad - grad)), np.max(np.abs(jet.hess - hess))))
