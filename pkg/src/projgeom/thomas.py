"""The lifted manifolds M-hat and M-tilde and the Thomas connection.

Lifted charts have dimension n + 1.  Slot 0 is the fibre coordinate (t > 0 on
M-hat, x~0 on M-tilde); slots 1..n carry the base coordinates, so a base
field in x_i becomes a lifted field in x_{i+1}.
"""

from __future__ import annotations

import enum
import math
from typing import Sequence

import numpy as np

from .connections import Connection, ProjectiveClass
from .expr import ScalarField, field_sum
from .geometry import TransitionMap, connection_to_chart, transform_vector


class Flavor(enum.Enum):
    HAT = "hat"
    TILDE = "tilde"


class LiftError(ValueError):
    pass


class LiftedConnection(Connection):
    """A connection on an (n+1)-dimensional lifted chart."""

    def __init__(self, coeffs, flavor: Flavor, dim: int | None = None):
        super().__init__(coeffs, dim)
        self.flavor = flavor
        self.base_dim = self.dim - 1

    def to_chart(self, T: TransitionMap) -> "LiftedConnection":
        return LiftedConnection(connection_to_chart(self.coeffs, T), self.flavor, self.dim)


def lift_field(f: ScalarField) -> ScalarField:
    """Base field as a function on the lifted chart (fibre-independent)."""
    return f.reindex(1, f.dim + 1)


def fibre(n: int) -> ScalarField:
    """The fibre coordinate x0 on an (n+1)-dim lifted chart."""
    return ScalarField.coordinate(0, n + 1)


def _check_hat(p: Sequence[float]) -> None:
    if not p[0] > 0:
        raise LiftError(f"fibre coordinate t must be positive, got {p[0]!r}")


def lift_transition(T: TransitionMap) -> tuple[TransitionMap, TransitionMap]:
    """(T~ on M-tilde, T^ on M-hat) induced by a base transition.

    x~'0 = x~0 + log J,  t' = t J,  base components unchanged.
    """
    n = T.dim
    det = lift_field(T.det_field())
    det_back = lift_field(T.det_field().compose(T.inverse))  # J at g(x')
    base_fwd = [lift_field(f) for f in T.forward]
    base_inv = [lift_field(g) for g in T.inverse]
    s = fibre(n)
    tilde = TransitionMap([s + det.apply("log")] + base_fwd, [s - det_back.apply("log")] + base_inv)
    hat = TransitionMap([s * det] + base_fwd, [s / det_back] + base_inv)
    return tilde, hat


def F_transition(n: int) -> TransitionMap:
    """F : M-hat -> M-tilde, (t, x) -> (log t, x)."""
    xs = [ScalarField.coordinate(i, n + 1) for i in range(1, n + 1)]
    s = fibre(n)
    return TransitionMap([s.apply("log")] + xs, [s.apply("exp")] + xs)


def F_map(p_hat: Sequence[float]) -> np.ndarray:
    _check_hat(p_hat)
    out = np.array(p_hat, dtype=float)
    out[0] = math.log(out[0])
    return out


def F_inverse(p_tilde: Sequence[float]) -> np.ndarray:
    out = np.array(p_tilde, dtype=float)
    out[0] = math.exp(out[0])
    return out


def thomas_lift(P: ProjectiveClass) -> LiftedConnection:
    """Linear connection on M-tilde built from trace-free symbols P.

    G~^k_ij = P^k_ij                                  (base indices)
    G~^k_i0 = -d^k_i / (n+1)                          (i, k = 0..n)
    G~^0_ij = (n+1)/(n-1) (d_r P^r_ij - P^r_si P^s_rj)  (base indices)
    """
    n = P.dim
    if n < 2:
        raise LiftError("the Thomas lift needs n >= 2")
    N = n + 1
    zero = ScalarField.constant(0.0, N)
    fib = ScalarField.constant(-1.0 / (n + 1), N)
    c = (n + 1) / (n - 1)
    coeffs = [[[zero] * N for _ in range(N)] for _ in range(N)]
    for K in range(N):
        coeffs[K][K][0] = coeffs[K][0][K] = fib
    for k in range(n):
        for i in range(n):
            for j in range(n):
                coeffs[k + 1][i + 1][j + 1] = lift_field(P.coeffs[k][i][j])
    for i in range(n):
        for j in range(i, n):
            div = [P.coeffs[r][i][j].derive(r) for r in range(n)]
            quad = [P.coeffs[r][s][i] * P.coeffs[s][r][j] for r in range(n) for s in range(n)]
            val = c * (field_sum(div, n) - field_sum(quad, n))
            coeffs[0][i + 1][j + 1] = coeffs[0][j + 1][i + 1] = lift_field(val)
    return LiftedConnection(coeffs, Flavor.TILDE, N)


def hat_connection(P: ProjectiveClass) -> LiftedConnection:
    """Pull-back of the Thomas connection along F, in M-hat coordinates."""
    tilde = thomas_lift(P)
    n = P.dim
    back = F_transition(n).inverted()  # M-tilde -> M-hat
    return LiftedConnection(connection_to_chart(tilde.coeffs, back), Flavor.HAT, n + 1)


def weight_vector_field_check(p_hat: Sequence[float], direction: Sequence[float] | None = None) -> np.ndarray:
    """Push a tangent vector at p^ forward along F.

    The default direction is the weight field t d/dt, whose image is
    d/dx~0 = (1, 0, ..., 0) at every point.
    """
    _check_hat(p_hat)
    n = len(p_hat) - 1
    if direction is None:
        direction = np.zeros(n + 1)
        direction[0] = p_hat[0]
    return transform_vector(direction, F_transition(n), p_hat)
