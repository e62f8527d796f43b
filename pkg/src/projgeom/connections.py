"""Torsion-free connections, Thomas projective symbols and Cartan curvature.

Coefficient arrays are indexed ``[k][i][j]`` for G^k_ij.

Sign convention for the connection 1-forms.  Horizontal curves of the
Ehresmann form satisfy d(xi)^i = omega^i_j xi^j along the curve, whereas
parallel transport under G is d(xi)^i = -G^i_jk xi^j dx^k.  We therefore use
omega^i_j = -G^i_jk dx^k, and the curvature is the displayed combination
d(omega) - omega ^ omega.  With this choice R_jk is a tensor and equals half
the usual Ricci tensor (2-form components are stored antisymmetrised,
B_kl dx^k ^ dx^l -> (B - B^T)/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import ScalarField, as_field, evaluate_many, field_sum
from .geometry import TransitionMap, connection_to_chart, inverse_matrix

TRACE_TOL = 1e-10
RICCI_SYMMETRY_TOL = 1e-8


class ConnectionError_(ValueError):
    pass


class TorsionError(ConnectionError_):
    """Coefficients are not symmetric in their lower indices."""


class TraceError(ConnectionError_):
    """Projective symbols are not trace-free."""


class SingularMetricError(ConnectionError_):
    pass


class AsymmetricRicciError(ConnectionError_):
    """Ricci tensor not symmetric: the normal-form characterisation does not apply."""


def _probe_points(dim: int) -> list[list[float]]:
    rng = np.random.default_rng(12345)
    return (0.3 + 0.9 * rng.random((3, dim))).tolist()


def _symmetric_coeffs(raw, dim: int) -> list[list[list[ScalarField]]]:
    n = dim
    if len(raw) != n or any(len(r) != n or any(len(c) != n for c in r) for r in raw):
        raise ConnectionError_(f"coefficient array must have shape ({n}, {n}, {n})")
    c = [[[as_field(raw[k][i][j], n) for j in range(n)] for i in range(n)] for k in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                a, b = c[k][i][j], c[k][j][i]
                if a == b:
                    continue
                if not _numerically_equal(a, b):
                    raise TorsionError(
                        f"G^{k}_{i}{j} = {a.text} differs from G^{k}_{j}{i} = {b.text}"
                    )
                c[k][j][i] = a
    return c


def _numerically_equal(a: ScalarField, b: ScalarField) -> bool:
    seen = 0
    for p in _probe_points(a.dim):
        try:
            va, vb = a(p), b(p)
        except ArithmeticError:
            continue
        seen += 1
        if abs(va - vb) > 1e-12 * max(1.0, abs(va)):
            return False
    return seen > 0


class _Symbols:
    """Shared storage for symmetric (n, n, n) coefficient fields."""

    def __init__(self, coeffs, dim: int | None = None):
        dim = dim or len(coeffs)
        if dim < 2:
            raise ConnectionError_("dimension n = 1 is not supported (1/(n-1) is undefined)")
        self.dim = dim
        self.coeffs = _symmetric_coeffs(coeffs, dim)

    @classmethod
    def zero(cls, dim: int):
        z = ScalarField.constant(0.0, dim)
        return cls([[[z] * dim for _ in range(dim)] for _ in range(dim)], dim)

    def flat(self) -> list[ScalarField]:
        return [f for plane in self.coeffs for row in plane for f in row]

    def at(self, point: Sequence[float]) -> np.ndarray:
        n = self.dim
        return evaluate_many(self.flat(), point).reshape(n, n, n)

    def __getitem__(self, idx) -> ScalarField:
        k, i, j = idx
        return self.coeffs[k][i][j]

    def texts(self) -> list:
        return [[[f.text for f in row] for row in plane] for plane in self.coeffs]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class Connection(_Symbols):
    """Torsion-free linear connection G^k_ij (symmetry enforced on construction)."""

    def trace(self) -> list[ScalarField]:
        """G^l_lj for each j."""
        n = self.dim
        return [field_sum([self.coeffs[l][l][j] for l in range(n)], n) for j in range(n)]

    def to_chart(self, T: TransitionMap) -> "Connection":
        return Connection(connection_to_chart(self.coeffs, T), self.dim)


class ProjectiveClass(_Symbols):
    """Trace-free symmetric Thomas symbols P^k_ij of a projective class."""

    def __init__(self, coeffs, dim: int | None = None, check_points=None):
        super().__init__(coeffs, dim)
        if check_points is not None:
            defect = self.trace_defect(check_points)
            if defect > TRACE_TOL:
                raise TraceError(f"symbols are not trace-free (max |P^l_lj| = {defect:.3e})")

    def trace_defect(self, points) -> float:
        worst = 0.0
        for p in points:
            v = self.at(p)
            worst = max(worst, float(np.max(np.abs(np.einsum("llj->j", v)))))
        return worst

    def as_connection(self) -> Connection:
        """The representative connection G := P."""
        return Connection(self.coeffs, self.dim)


def connection_from_strings(nested, dim: int) -> Connection:
    return Connection(nested, dim)


# -- constructions -------------------------------------------------------------


def levi_civita(metric, dim: int | None = None, check_points=None) -> Connection:
    """Christoffel symbols 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)."""
    n = dim or len(metric)
    g = [[as_field(metric[i][j], n) for j in range(n)] for i in range(n)]
    ginv, det = inverse_matrix(g, n)
    if check_points is not None:
        for p in check_points:
            if abs(det(p)) < 1e-12:
                raise SingularMetricError(f"metric is singular at {list(map(float, p))}")
    dg = [[[g[i][j].derive(l) for l in range(n)] for j in range(n)] for i in range(n)]
    # lowered symbols [l][i][j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    low = [
        [[0.5 * (dg[j][l][i] + dg[i][l][j] - dg[i][j][l]) for j in range(n)] for i in range(n)]
        for l in range(n)
    ]
    coeffs = [[[None] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                val = field_sum([ginv[k][l] * low[l][i][j] for l in range(n)], n)
                coeffs[k][i][j] = coeffs[k][j][i] = val
    return Connection(coeffs, n)


def pi_symbols(conn: Connection) -> ProjectiveClass:
    """P^k_ij = G^k_ij - (d^k_i G^l_lj + d^k_j G^l_il) / (n + 1)."""
    n = conn.dim
    tr = conn.trace()
    c = 1.0 / (n + 1)
    coeffs = [[[None] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                val = conn.coeffs[k][i][j]
                if k == i:
                    val = val - c * tr[j]
                if k == j:
                    val = val - c * tr[i]
                coeffs[k][i][j] = coeffs[k][j][i] = val
    return ProjectiveClass(coeffs, n)


def projective_shift(conn: Connection, theta: Sequence) -> Connection:
    """G^k_ij + d^k_i t_j + d^k_j t_i for a 1-form t."""
    n = conn.dim
    t = [as_field(v, n) for v in theta]
    coeffs = [[[None] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                val = conn.coeffs[k][i][j]
                if k == i:
                    val = val + t[j]
                if k == j:
                    val = val + t[i]
                coeffs[k][i][j] = val
    return Connection(coeffs, n)


# -- curvature -------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureData:
    """Antisymmetrised curvature components at a point.

    A[i, j, k, l]  components of Omega^i_j
    A0[i, k, l]    components of Omega^0_i
    trace[j, k]    A_jk = A^i_jki
    """

    A: np.ndarray
    A0: np.ndarray
    trace: np.ndarray


def _zero_omega0(n: int) -> list[list[ScalarField]]:
    z = ScalarField.constant(0.0, n)
    return [[z] * n for _ in range(n)]


def curvature_fields(conn: Connection, omega0=None):
    """Symbolic (A, A0) with A[i][j][k][l], A0[i][k][l] as fields.

    ``omega0[j][k]`` holds the coefficients of omega^0_j = omega0_jk dx^k.
    """
    n = conn.dim
    W = [[[-conn.coeffs[i][j][k] for k in range(n)] for j in range(n)] for i in range(n)]
    o0 = _zero_omega0(n) if omega0 is None else [[as_field(v, n) for v in row] for row in omega0]

    def anti(B):
        return [[0.5 * (B[k][l] - B[l][k]) for l in range(n)] for k in range(n)]

    A = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            B = [[None] * n for _ in range(n)]
            for k in range(n):
                for l in range(n):
                    terms = [W[i][j][l].derive(k)]
                    terms += [-(W[i][p][k] * W[p][j][l]) for p in range(n)]
                    if l == i:
                        terms.append(-o0[j][k])
                    if i == j:
                        terms.append(-o0[l][k])
                    B[k][l] = field_sum(terms, n)
            A[i][j] = anti(B)
    A0 = []
    for i in range(n):
        B = [
            [field_sum([o0[j][k] * W[j][i][l] for j in range(n)], n) for l in range(n)]
            for k in range(n)
        ]
        A0.append(anti(B))
    return A, A0


def curvature(conn: Connection, omega0, point: Sequence[float]) -> CurvatureData:
    n = conn.dim
    A_f, A0_f = curvature_fields(conn, omega0)
    flat = [A_f[i][j][k][l] for i in range(n) for j in range(n) for k in range(n) for l in range(n)]
    flat0 = [A0_f[i][k][l] for i in range(n) for k in range(n) for l in range(n)]
    vals = evaluate_many(flat + flat0, point)
    A = vals[: n**4].reshape(n, n, n, n)
    A0 = vals[n**4 :].reshape(n, n, n)
    return CurvatureData(A, A0, np.einsum("ijki->jk", A))


def ricci_fields(conn: Connection) -> list[list[ScalarField]]:
    """R_jk = R^i_jki of d(omega) - omega ^ omega, as fields."""
    n = conn.dim
    A, _ = curvature_fields(conn, None)
    return [[field_sum([A[i][j][k][i] for i in range(n)], n) for k in range(n)] for j in range(n)]


def ricci(conn: Connection, point: Sequence[float]) -> np.ndarray:
    n = conn.dim
    R = ricci_fields(conn)
    return evaluate_many([R[j][k] for j in range(n) for k in range(n)], point).reshape(n, n)


def normal_omega0(conn: Connection, points=None) -> list[list[ScalarField]]:
    """omega^0_j = 2/(n-1) R_jk dx^k; requires a symmetric Ricci tensor at ``points``."""
    n = conn.dim
    R = ricci_fields(conn)
    for p in points if points is not None else []:
        r = evaluate_many([R[j][k] for j in range(n) for k in range(n)], p).reshape(n, n)
        asym = float(np.max(np.abs(r - r.T)))
        if asym > RICCI_SYMMETRY_TOL:
            raise AsymmetricRicciError(
                f"Ricci tensor is not symmetric at {list(map(float, p))} (|R - R^T| = {asym:.3e})"
            )
    c = 2.0 / (n - 1)
    return [[c * R[j][k] for k in range(n)] for j in range(n)]


def normality_defect(conn: Connection, omega0, points) -> float:
    """max |A_jk| over ``points``; zero exactly when the connection is normal there."""
    worst = 0.0
    for p in points:
        worst = max(worst, float(np.max(np.abs(curvature(conn, omega0, p).trace))))
    return worst
