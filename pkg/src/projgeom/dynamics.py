"""Geodesics, projective parallel transport and fractional-linear fitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .connections import Connection
from .expr import DomainError, ScalarField, as_field, field_sum
from .expr.compile import compile_exprs

BLOWUP = 1e8


class IntegrationError(ArithmeticError):
    """The state left the domain of the data or stopped being finite."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t = {time:.6g}")
        self.time = time


class TransportBlowUp(IntegrationError):
    pass


class DegenerateConfigurationError(ValueError):
    pass


def rk4(rate: Callable[[float, np.ndarray], np.ndarray], y0, T: float, h: float, limit: float | None = None):
    """Classical fixed-step Runge-Kutta.  Returns (ts, ys)."""
    if h <= 0 or T < 0:
        raise ValueError("need h > 0 and T >= 0")
    steps = max(1, int(round(T / h)))
    h = T / steps if T > 0 else 0.0
    y = np.array(y0, dtype=float)
    ys = np.empty((steps + 1, y.size))
    ys[0] = y
    t = 0.0
    for k in range(steps):
        try:
            k1 = rate(t, y)
            k2 = rate(t + h / 2, y + h / 2 * k1)
            k3 = rate(t + h / 2, y + h / 2 * k2)
            k4 = rate(t + h, y + h * k3)
        except DomainError as exc:
            raise IntegrationError(f"field domain error ({exc})", t) from exc
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (k + 1) * h
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state", t)
        if limit is not None and np.max(np.abs(y)) > limit:
            raise TransportBlowUp(f"|state| exceeded {limit:g}", t)
        ys[k + 1] = y
    return np.linspace(0.0, T, steps + 1), ys


@dataclass(frozen=True)
class Path:
    """Sampled curve: times ``ts``, positions ``xs`` and optional velocities."""

    ts: np.ndarray
    xs: np.ndarray
    vs: np.ndarray | None = None

    @property
    def end(self) -> np.ndarray:
        return self.xs[-1]

    def rows(self) -> np.ndarray:
        cols = [self.ts[:, None], self.xs] + ([self.vs] if self.vs is not None else [])
        return np.hstack(cols)


def _symbols_fn(conn: Connection):
    n = conn.dim
    fn = compile_exprs(tuple(f.expr for f in conn.flat()))
    return lambda x: np.array(fn(x)).reshape(n, n, n)


def _geodesic(conn: Connection, cubic, x0, v0, T, h) -> Path:
    n = conn.dim
    gamma = _symbols_fn(conn)
    if cubic is not None:
        fn = compile_exprs(tuple(f.expr for row in cubic for f in row))
        c0 = lambda x: np.array(fn(x)).reshape(n, n)  # noqa: E731

    def rate(_t, y):
        x, v = y[:n], y[n:]
        acc = -np.einsum("kij,i,j->k", gamma(x), v, v)
        if cubic is not None:
            acc -= (v @ c0(x) @ v) * v
        return np.concatenate([v, acc])

    ts, ys = rk4(rate, np.concatenate([np.asarray(x0, float), np.asarray(v0, float)]), T, h)
    return Path(ts, ys[:, :n], ys[:, n:])


def integrate_linear_geodesic(conn: Connection, x0, v0, T: float = 1.0, h: float = 1e-3) -> Path:
    """x''^k + G^k_ij x'^i x'^j = 0."""
    return _geodesic(conn, None, x0, v0, T, h)


def integrate_projective_geodesic(conn: Connection, omega0, x0, v0, T: float = 1.0, h: float = 1e-3) -> Path:
    """x''^k + G^k_ij x'^i x'^j + w_ij x'^i x'^j x'^k = 0.

    ``omega0[i][j]`` are the coefficients w_ij of omega^0.  The cubic term is
    parallel to the velocity, so it only reparametrises the path.
    """
    n = conn.dim
    w = [[as_field(omega0[i][j], n) for j in range(n)] for i in range(n)]
    return _geodesic(conn, w, x0, v0, T, h)


# -- comparing unparametrised curves -------------------------------------------------


def _chord(xs: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(xs, axis=0), axis=1))])


def _truncate(xs: np.ndarray, length: float) -> np.ndarray:
    s = _chord(xs)
    k = int(np.searchsorted(s, length, side="right"))
    if k >= len(xs):
        return xs
    a = (length - s[k - 1]) / (s[k] - s[k - 1])
    return np.vstack([xs[:k], xs[k - 1] + a * (xs[k] - xs[k - 1])])


def _to_polyline(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a, b = poly[:-1], poly[1:]
    d = b - a
    dd = np.einsum("kd,kd->k", d, d)
    dd[dd == 0] = 1.0
    rel = points[:, None, :] - a[None, :, :]
    u = np.clip(np.einsum("mkd,kd->mk", rel, d) / dd, 0.0, 1.0)
    foot = a[None] + u[..., None] * d[None]
    return np.min(np.linalg.norm(points[:, None, :] - foot, axis=2), axis=1)


def unparametrized_distance(path1, path2) -> float:
    """Symmetric mean point-to-curve distance after cutting both curves to
    their common chord length from the shared start."""
    x1 = np.asarray(getattr(path1, "xs", path1), dtype=float)
    x2 = np.asarray(getattr(path2, "xs", path2), dtype=float)
    if len(x1) < 2 or len(x2) < 2:
        raise ValueError("paths need at least two samples")
    length = min(_chord(x1)[-1], _chord(x2)[-1])
    if length <= 0:
        raise ValueError("paths have zero length")
    x1, x2 = _truncate(x1, length), _truncate(x2, length)
    return float(max(_to_polyline(x1, x2).mean(), _to_polyline(x2, x1).mean()))


def richardson_quotient(err_h: float, err_half: float) -> float:
    """err(h) / err(h/2); close to 16 for a fourth-order method."""
    return float(err_h / err_half)


# -- projective parallel transport ---------------------------------------------------


class ProjectiveEhresmannData:
    """Coefficients of Psi^a = dxi^a - (phi^a_i + psi^a_bi xi^b + eta_bi xi^a xi^b) dx^i.

    phi[a][i], psi[a][b][i], eta[b][i] are fields on the n-dim base; the
    fibre has dimension m.
    """

    def __init__(self, phi, psi, eta, dim: int):
        m = len(phi)
        self.dim, self.fibre_dim = dim, m
        self.phi = [[as_field(v, dim) for v in row] for row in phi]
        self.psi = [[[as_field(v, dim) for v in row] for row in plane] for plane in psi]
        self.eta = [[as_field(v, dim) for v in row] for row in eta]
        shapes = (
            (len(self.phi), len(self.phi[0])),
            (len(self.psi), len(self.psi[0]), len(self.psi[0][0])),
            (len(self.eta), len(self.eta[0])),
        )
        if shapes != ((m, dim), (m, m, dim), (m, dim)):
            raise ValueError(f"inconsistent Ehresmann data shapes {shapes}")
        flat = [f for row in self.phi for f in row]
        flat += [f for plane in self.psi for row in plane for f in row]
        flat += [f for row in self.eta for f in row]
        self._fn = compile_exprs(tuple(f.expr for f in flat))

    @classmethod
    def zero(cls, dim: int, m: int) -> "ProjectiveEhresmannData":
        return cls([[0.0] * dim] * m, [[[0.0] * dim] * m] * m, [[0.0] * dim] * m, dim)

    @classmethod
    def random_polynomial(cls, dim: int, m: int, seed: int = 0, scale: float = 0.5):
        """Affine-in-x coefficients with random entries; for tests and demos."""
        rng = np.random.default_rng(seed)

        def poly():
            c = scale * rng.uniform(-1, 1, dim + 1)
            xs = [float(c[i + 1]) * ScalarField.coordinate(i, dim) for i in range(dim)]
            return float(c[0]) + field_sum(xs, dim)

        return cls(
            [[poly() for _ in range(dim)] for _ in range(m)],
            [[[poly() for _ in range(dim)] for _ in range(m)] for _ in range(m)],
            [[poly() for _ in range(dim)] for _ in range(m)],
            dim,
        )

    def arrays(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n, m = self.dim, self.fibre_dim
        v = np.array(self._fn(x))
        a, b = m * n, m * n + m * m * n
        return v[:a].reshape(m, n), v[a:b].reshape(m, m, n), v[b:].reshape(m, n)

    def rate(self, x, xi: np.ndarray, xdot: np.ndarray) -> np.ndarray:
        phi, psi, eta = self.arrays(x)
        return phi @ xdot + np.einsum("abi,b,i->a", psi, xi, xdot) + (eta @ xdot) @ xi * xi


class BasePath:
    """A closed-form curve sigma(t) in the base, given by one field per
    coordinate in the single variable x0 (= t)."""

    def __init__(self, components: Sequence):
        self.components = [as_field(c, 1) for c in components]
        self.dim = len(self.components)
        exprs = [c.expr for c in self.components] + [c.derive(0).expr for c in self.components]
        self._fn = compile_exprs(tuple(exprs))

    @classmethod
    def straight(cls, start, velocity) -> "BasePath":
        return cls([f"{float(a)!r} + ({float(v)!r})*x0" for a, v in zip(start, velocity)])

    def __call__(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        v = np.array(self._fn((t,)))
        return v[: self.dim], v[self.dim :]


def transport_flow(rate: Callable[[float, np.ndarray], np.ndarray], xi0, T: float = 1.0, h: float = 1e-3) -> Path:
    """Integrate a fibre flow dxi/dt = rate(t, xi) with blow-up detection."""
    ts, ys = rk4(rate, xi0, T, h, limit=BLOWUP)
    return Path(ts, ys)


def parallel_transport(E: ProjectiveEhresmannData, base: BasePath, xi0, T: float = 1.0, h: float = 1e-3) -> Path:
    """Horizontal lift of ``base`` through xi0: the solution of Psi^a = 0."""
    if base.dim != E.dim:
        raise ValueError("base path and Ehresmann data have different dimensions")

    def rate(t, xi):
        x, xdot = base(t)
        return E.rate(x, xi, xdot)

    return transport_flow(rate, xi0, T, h)


# -- fractional-linear maps --------------------------------------------------------------


@dataclass(frozen=True)
class FractionalLinearMap:
    """xi -> (alpha xi + beta) / (gamma . xi + delta)."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: float

    def __post_init__(self):
        if abs(np.linalg.det(self.matrix())) < 1e-14:
            raise DegenerateConfigurationError("block matrix is singular")

    @classmethod
    def from_matrix(cls, M) -> "FractionalLinearMap":
        M = np.asarray(M, dtype=float)
        m = M.shape[0] - 1
        return cls(M[:m, :m].copy(), M[:m, m].copy(), M[m, :m].copy(), float(M[m, m]))

    @property
    def fibre_dim(self) -> int:
        return len(self.beta)

    def matrix(self) -> np.ndarray:
        m = len(self.beta)
        M = np.empty((m + 1, m + 1))
        M[:m, :m], M[:m, m], M[m, :m], M[m, m] = self.alpha, self.beta, self.gamma, self.delta
        return M

    def normalized(self) -> "FractionalLinearMap":
        M = self.matrix()
        return FractionalLinearMap.from_matrix(M / M.flat[np.argmax(np.abs(M))])

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return (self.alpha @ xi + self.beta) / (self.gamma @ xi + self.delta)

    def projective_distance(self, other: "FractionalLinearMap") -> float:
        a, b = self.normalized().matrix(), other.normalized().matrix()
        return float(min(np.max(np.abs(a - b)), np.max(np.abs(a + b))))


def fit_fractional_linear(pairs, m: int, holdout: int | None = None) -> tuple[FractionalLinearMap, float]:
    """Least-squares fractional-linear map through (xi_in, xi_out) pairs.

    Solves  xi_out (gamma . xi_in + delta) = alpha xi_in + beta  for the
    (m+1)^2 block entries up to scale.  The last ``holdout`` pairs are kept
    out of the fit; the returned residual is their max abs prediction error.
    """
    data = [(np.asarray(a, float).reshape(m), np.asarray(b, float).reshape(m)) for a, b in pairs]
    holdout = max(1, len(data) // 5) if holdout is None else holdout
    fit, test = data[: len(data) - holdout], data[len(data) - holdout :]
    if len(fit) < m + 2 or not test:
        raise DegenerateConfigurationError(
            f"need at least {m + 3} pairs ({m + 2} to fit plus a holdout), got {len(data)}"
        )
    N = m + 1
    rows = []
    for xin, xout in fit:
        hin = np.append(xin, 1.0)
        for a in range(m):
            # unknowns: M flattened row-major; row a of M gives alpha_a, beta_a
            r = np.zeros((N, N))
            r[a] = -hin
            r[m] = xout[a] * hin
            rows.append(r.ravel())
    A = np.array(rows)
    _, s, vt = np.linalg.svd(A)
    if len(s) < N * N - 1 or s[-1 if len(s) < N * N else -2] < 1e-10 * s[0]:
        raise DegenerateConfigurationError("pairs do not determine a unique map (rank deficient)")
    fmap = FractionalLinearMap.from_matrix(vt[-1].reshape(N, N)).normalized()
    residual = max(float(np.max(np.abs(fmap(xin) - xout))) for xin, xout in test)
    return fmap, residual
