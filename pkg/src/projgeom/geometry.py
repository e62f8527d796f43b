"""Charts, transition maps and the standard tensor transformation laws.

Transitions carry an explicit declared inverse, so every law here is exact:
derivatives of the inverse are taken from its own jets, never by numerically
inverting the forward map.  Both pointwise (numeric, at a source point) and
symbolic (field-valued, in the target chart) versions are provided.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import ScalarField, as_field, evaluate_many, field_sum, jets_many

SINGULAR_TOL = 1e-12


class GeometryError(ValueError):
    pass


class SingularJacobianError(GeometryError):
    pass


class TransitionError(GeometryError):
    """A transition is inconsistent with its declared inverse or orientation."""


@dataclass(frozen=True)
class Chart:
    """A coordinate box used to draw test points."""

    dim: int
    box: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.dim < 2:
            raise GeometryError("charts must have dimension n >= 2")
        if len(self.box) != self.dim:
            raise GeometryError("box must give one interval per coordinate")
        object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))
        for lo, hi in self.box:
            if not lo < hi:
                raise GeometryError(f"empty interval [{lo}, {hi}]")

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo = np.array([a for a, _ in self.box])
        hi = np.array([b for _, b in self.box])
        return lo + (hi - lo) * rng.random((count, self.dim))

    def contains(self, point: Sequence[float]) -> bool:
        return all(lo <= x <= hi for x, (lo, hi) in zip(point, self.box))


def _fields(items, dim: int) -> tuple[ScalarField, ...]:
    return tuple(as_field(f, dim) for f in items)


class TransitionMap:
    """Coordinate change x' = f(x) with declared inverse x = g(x')."""

    def __init__(self, forward: Sequence, inverse: Sequence, dim: int | None = None):
        dim = dim or len(forward)
        if len(forward) != dim or len(inverse) != dim:
            raise TransitionError("forward and inverse need one component per coordinate")
        self.dim = dim
        self.forward = _fields(forward, dim)
        self.inverse = _fields(inverse, dim)

    def __repr__(self) -> str:
        fwd = ", ".join(f.text for f in self.forward)
        return f"TransitionMap([{fwd}])"

    @classmethod
    def identity(cls, dim: int) -> "TransitionMap":
        xs = [ScalarField.coordinate(i, dim) for i in range(dim)]
        return cls(xs, xs)

    @classmethod
    def linear(cls, matrix, offset=None) -> "TransitionMap":
        """x' = A x + b for an invertible matrix A."""
        a = np.asarray(matrix, dtype=float)
        n = a.shape[0]
        b = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        ainv = np.linalg.inv(a)
        xs = [ScalarField.coordinate(i, n) for i in range(n)]

        def affine(m, shift):
            return [field_sum([m[i, j] * xs[j] for j in range(n)], n) + shift[i] for i in range(n)]

        return cls(affine(a, b), affine(ainv, -ainv @ b))

    def inverted(self) -> "TransitionMap":
        return TransitionMap(self.inverse, self.forward)

    def __call__(self, point: Sequence[float]) -> np.ndarray:
        return evaluate_many(self.forward, point)

    def pull(self, point: Sequence[float]) -> np.ndarray:
        """Declared inverse applied to a target-chart point."""
        return evaluate_many(self.inverse, point)

    def jacobian_fields(self) -> list[list[ScalarField]]:
        """Symbolic d f^i / d x^j in source coordinates."""
        return [[f.derive(j) for j in range(self.dim)] for f in self.forward]

    def inverse_jacobian_fields(self) -> list[list[ScalarField]]:
        """Symbolic d g^a / d x'^i in target coordinates."""
        return [[g.derive(i) for i in range(self.dim)] for g in self.inverse]

    def det_field(self) -> ScalarField:
        """Symbolic Jacobian determinant of the forward map (source coordinates)."""
        return determinant(self.jacobian_fields(), self.dim)

    def check(self, points: Sequence[Sequence[float]], tol: float = 1e-8) -> None:
        """Verify forward-then-inverse identity and det J > 0 at ``points``."""
        for p in points:
            q = self(p)
            back = self.pull(q)
            err = float(np.max(np.abs(back - np.asarray(p, dtype=float))))
            if err > tol:
                raise TransitionError(
                    f"declared inverse fails at {list(map(float, p))}: error {err:.3e}"
                )
            _, det, _ = jacobian(self, p)
            if det <= 0:
                raise TransitionError(
                    f"orientation-reversing transition at {list(map(float, p))} (det J = {det:.6g})"
                )


def compose(second: TransitionMap, first: TransitionMap) -> TransitionMap:
    """The transition ``second`` after ``first``."""
    return TransitionMap(
        [f.compose(first.forward) for f in second.forward],
        [g.compose(second.inverse) for g in first.inverse],
    )


def determinant(m: Sequence[Sequence[ScalarField]], dim: int) -> ScalarField:
    """Leibniz-formula determinant of a small matrix of fields."""
    n = len(m)
    terms = []
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        prod = m[0][perm[0]]
        for i in range(1, n):
            prod = prod * m[i][perm[i]]
        terms.append(-prod if inversions % 2 else prod)
    return field_sum(terms, dim)


def inverse_matrix(m: Sequence[Sequence[ScalarField]], dim: int) -> tuple[list[list[ScalarField]], ScalarField]:
    """Symbolic inverse via the adjugate; returns (inverse, determinant)."""
    n = len(m)
    det = determinant(m, dim)
    if n == 1:
        return [[1 / det]], det
    inv = []
    for i in range(n):
        row = []
        for j in range(n):
            minor = [[m[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            cof = determinant(minor, dim)
            row.append((cof if (i + j) % 2 == 0 else -cof) / det)
        inv.append(row)
    return inv, det


# -- pointwise laws ----------------------------------------------------------


def jacobian(T: TransitionMap, p: Sequence[float]) -> tuple[np.ndarray, float, float]:
    """(J, det J, |det J|) of the forward map at source point ``p``."""
    jets = jets_many(T.forward, p)
    J = np.array([j.grad for j in jets])
    det = float(np.linalg.det(J))
    if abs(det) < SINGULAR_TOL:
        raise SingularJacobianError(f"singular Jacobian at {list(map(float, p))} (det = {det:.3e})")
    return J, det, abs(det)


def _inverse_jets(T: TransitionMap, q: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """dx/dx' (n, n) and d2x/dx'dx' (n, n, n) at target point ``q``."""
    jets = jets_many(T.inverse, q)
    K = np.array([j.grad for j in jets])
    H = np.array([j.hess for j in jets])
    return K, H


def _values(fields, p, shape) -> np.ndarray:
    flat = [as_field(f, len(p)) for f in np.asarray(fields, dtype=object).ravel()]
    return evaluate_many(flat, p).reshape(shape)


def transform_connection(conn, T: TransitionMap, p: Sequence[float]) -> np.ndarray:
    """Coefficients of ``conn`` in the target chart, at the image of ``p``.

    G'^k_ij = (dx'^k/dx^c)(dx^a/dx'^i)(dx^b/dx'^j) G^c_ab
              + (dx'^k/dx^c) d2x^c/dx'^i dx'^j
    """
    n = T.dim
    gamma = _values(getattr(conn, "coeffs", conn), p, (n, n, n))
    J, _, _ = jacobian(T, p)
    K, H = _inverse_jets(T, T(p))
    out = np.einsum("kc,ai,bj,cab->kij", J, K, K, gamma) + np.einsum("kc,cij->kij", J, H)
    return 0.5 * (out + out.transpose(0, 2, 1))


def transform_tensor2(S, T: TransitionMap, p: Sequence[float]) -> np.ndarray:
    """Contravariant rank-2 law S'^ij = J^i_a J^j_b S^ab at the image of ``p``."""
    n = T.dim
    s = _values(getattr(S, "components", S), p, (n, n))
    J, _, _ = jacobian(T, p)
    return J @ s @ J.T


def transform_oneform(theta, T: TransitionMap, p: Sequence[float]) -> np.ndarray:
    """Covariant law theta'_i = (dx^a/dx'^i) theta_a at the image of ``p``."""
    n = T.dim
    t = _values(theta, p, (n,))
    K, _ = _inverse_jets(T, T(p))
    return K.T @ t


def transform_vector(v: Sequence[float], T: TransitionMap, p: Sequence[float]) -> np.ndarray:
    """Push a tangent vector at ``p`` forward along ``T``.

    Uses directional jets seeded with ``v`` so the result is a single
    directional derivative per component (no explicit matrix product).
    """
    seeds = np.asarray(v, dtype=float).reshape(-1, 1)
    return np.array([j.grad[0] for j in jets_many(T.forward, p, seeds)])


# -- symbolic laws (fields in the target chart) ---------------------------------


def _pulled(T: TransitionMap, fields):
    """Source-chart fields re-expressed in target coordinates via the inverse."""
    return [as_field(f, T.dim).compose(T.inverse) for f in fields]


def scalar_to_chart(f: ScalarField, T: TransitionMap) -> ScalarField:
    """f' = f o g."""
    return f.compose(T.inverse)


def connection_to_chart(coeffs, T: TransitionMap) -> list[list[list[ScalarField]]]:
    """Symbolic transformation law for connection coefficients [k][i][j]."""
    n = T.dim
    coeffs = getattr(coeffs, "coeffs", coeffs)
    Jf = [_pulled(T, row) for row in T.jacobian_fields()]  # dx'^k/dx^c at g(x')
    K = T.inverse_jacobian_fields()  # dx^a/dx'^i
    H = [[[K[c][i].derive(j) for j in range(n)] for i in range(n)] for c in range(n)]
    G = [[_pulled(T, coeffs[c][a]) for a in range(n)] for c in range(n)]
    out = [[[None] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            # inner^c = K^a_i K^b_j G^c_ab + H^c_ij
            inner = [
                field_sum(
                    [K[a][i] * K[b][j] * G[c][a][b] for a in range(n) for b in range(n)]
                    + [H[c][i][j]],
                    n,
                )
                for c in range(n)
            ]
            for k in range(n):
                val = field_sum([Jf[k][c] * inner[c] for c in range(n)], n)
                out[k][i][j] = out[k][j][i] = val
    return out


def tensor2_to_chart(S, T: TransitionMap) -> list[list[ScalarField]]:
    n = T.dim
    S = getattr(S, "components", S)
    Jf = [_pulled(T, row) for row in T.jacobian_fields()]
    Sp = [_pulled(T, row) for row in S]
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            val = field_sum(
                [Jf[i][a] * Jf[j][b] * Sp[a][b] for a in range(n) for b in range(n)], n
            )
            out[i][j] = out[j][i] = val
    return out


def oneform_to_chart(theta, T: TransitionMap) -> list[ScalarField]:
    n = T.dim
    K = T.inverse_jacobian_fields()
    tp = _pulled(T, theta)
    return [field_sum([K[a][i] * tp[a] for a in range(n)], n) for i in range(n)]
