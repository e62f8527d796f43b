"""The invariant projective Laplacian and its extension to densities."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .connections import ProjectiveClass, pi_symbols
from .densities import BracketData, DensityElement, UpperMetric, as_weight
from .expr import ScalarField, as_field, evaluate_many, fd_derivatives, field_sum, jets_many
from .thomas import fibre, hat_connection, lift_field


class SecondOrderOperator:
    """L f = S^ij d_i d_j f + b^i d_i f + c f, stored coefficientwise."""

    def __init__(self, principal: UpperMetric, drift: Sequence, zeroth=0.0):
        n = principal.dim
        if len(drift) != n:
            raise ValueError("drift needs one component per coordinate")
        self.dim = n
        self.principal = principal
        self.drift = [as_field(b, n) for b in drift]
        self.zeroth = as_field(zeroth, n)

    def __repr__(self) -> str:
        return f"SecondOrderOperator(dim={self.dim})"

    def fields(self) -> list[ScalarField]:
        n = self.dim
        S = self.principal.components
        return [S[i][j] for i in range(n) for j in range(n)] + self.drift + [self.zeroth]

    def coefficients_at(self, point) -> tuple[np.ndarray, np.ndarray, float]:
        n = self.dim
        v = evaluate_many(self.fields(), point)
        return v[: n * n].reshape(n, n), v[n * n : n * n + n], float(v[-1])

    def apply(self, f, point) -> float:
        f = as_field(f, self.dim)
        S, b, c = self.coefficients_at(point)
        jet = jets_many([f], point)[0]
        return float(np.sum(S * jet.hess) + b @ jet.grad + c * jet.value)

    def apply_fd(self, f, point, h: float = 1e-3) -> float:
        """Same coefficients, derivatives of ``f`` by central differences."""
        f = as_field(f, self.dim)
        S, b, c = self.coefficients_at(point)
        grad, hess = fd_derivatives(f, point, h)
        return float(np.sum(S * hess) + b @ grad + c * f(point))

    def apply_field(self, f) -> ScalarField:
        n = self.dim
        f = as_field(f, n)
        S = self.principal.components
        df = [f.derive(i) for i in range(n)]
        terms = [S[i][j] * df[i].derive(j) for i in range(n) for j in range(n)]
        terms += [self.drift[i] * df[i] for i in range(n)]
        terms.append(self.zeroth * f)
        return field_sum(terms, n)

    def coefficient_defect(self, other: "SecondOrderOperator", points) -> float:
        """max |coefficient difference| over ``points``."""
        worst = 0.0
        for p in points:
            a = evaluate_many(self.fields(), p)
            b = evaluate_many(other.fields(), p)
            worst = max(worst, float(np.max(np.abs(a - b))))
        return worst

    def to_json(self) -> dict:
        return {
            "principal": self.principal.texts(),
            "drift": [b.text for b in self.drift],
            "zeroth": self.zeroth.text,
        }


def projective_laplacian(P, S: UpperMetric) -> SecondOrderOperator:
    """S^ij d_i d_j + (2/(n+3) d_j S^ij - (n+1)/(n+3) S^jk P^i_jk) d_i."""
    n = P.dim
    if S.dim != n:
        raise ValueError("upper metric and symbols have different dimensions")
    div = S.divergence()
    a, c = 2.0 / (n + 3), (n + 1) / (n + 3)
    drift = []
    for i in range(n):
        contr = field_sum(
            [S.components[j][k] * P.coeffs[i][j][k] for j in range(n) for k in range(n)], n
        )
        drift.append(a * div[i] - c * contr)
    return SecondOrderOperator(S, drift)


# -- extension to the density algebra -----------------------------------------------


def unit_fibre(F: ScalarField, n: int) -> ScalarField:
    """Restrict a field on the (n+1)-dim hat chart to t = 1, as a base field."""
    mapping = {0: 1.0}
    mapping.update({i: ScalarField.coordinate(i - 1, n) for i in range(1, n + 1)})
    return F.substitute(mapping, n)


@dataclass(frozen=True)
class HatOperator:
    """A second-order operator on M-hat that shifts density weight by ``weight``."""

    op: SecondOrderOperator
    weight: Fraction
    base_dim: int

    def apply(self, a: DensityElement) -> DensityElement:
        n = self.base_dim
        t = fibre(n)
        out = []
        for mu, phi in a.terms.items():
            image = self.op.apply_field(lift_field(phi) * t**mu)
            out.append((mu + self.weight, unit_fibre(image, n)))
        return DensityElement(out, n)

    def apply_at(self, a: DensityElement, p_hat) -> float:
        return self.op.apply(a.hat_field(), p_hat)

    def bracket(self) -> BracketData:
        """(S, gamma, theta) read from the principal symbol at t = 1."""
        n = self.base_dim
        S = self.op.principal.components
        s = [[unit_fibre(S[i + 1][j + 1], n) for j in range(n)] for i in range(n)]
        gamma = [unit_fibre(S[0][i + 1], n) for i in range(n)]
        return BracketData.build(UpperMetric(s, n), gamma, unit_fibre(S[0][0], n), self.weight)

    def base_drift(self) -> list[ScalarField]:
        return [unit_fibre(b, self.base_dim) for b in self.op.drift[1:]]

    def fibre_drift(self) -> ScalarField:
        """drift^0 / t at t = 1."""
        return unit_fibre(self.op.drift[0], self.base_dim)


def hat_upper_metric(B: BracketData) -> UpperMetric:
    """S^ij t^l, gamma^i t^(l+1), theta t^(l+2) on the hat chart."""
    n = B.dim
    N = n + 1
    t = fibre(n)
    lam = B.weight
    comps = [[None] * N for _ in range(N)]
    comps[0][0] = lift_field(B.theta) * t ** (lam + 2)
    for i in range(n):
        g = lift_field(B.gamma[i]) * t ** (lam + 1)
        comps[0][i + 1] = comps[i + 1][0] = g
        for j in range(n):
            comps[i + 1][j + 1] = lift_field(B.S.components[i][j]) * t**lam
    return UpperMetric(comps, N)


def extend_to_densities(B: BracketData, P: ProjectiveClass) -> HatOperator:
    """The projective Laplacian of the Thomas class on M-hat, built from B."""
    if B.dim != P.dim:
        raise ValueError("bracket and symbols have different dimensions")
    hat_pi = pi_symbols(hat_connection(P))
    op = projective_laplacian(hat_pi, hat_upper_metric(B))
    return HatOperator(op, B.weight, P.dim)


def polarization(D: HatOperator, a: DensityElement, b: DensityElement) -> DensityElement:
    """D(ab) - D(a) b - a D(b) + D(1) ab."""
    n = D.base_dim
    one = DensityElement.one(n)
    ab = a * b
    return D.apply(ab) - D.apply(a) * b - a * D.apply(b) + D.apply(one) * ab


# -- reading gamma and theta off the extension ------------------------------------------


@dataclass(frozen=True)
class SymbolReport:
    gamma: tuple[ScalarField, ...]
    theta: ScalarField
    gamma_slope: Fraction | float
    theta_slope: Fraction | float

    def to_json(self, points=()) -> dict:
        out = {
            "gamma": [g.text for g in self.gamma],
            "theta": self.theta.text,
            "gamma_slope": str(self.gamma_slope),
            "theta_slope": str(self.theta_slope),
        }
        if points:
            out["samples"] = [
                {
                    "point": list(map(float, p)),
                    "gamma": evaluate_many(list(self.gamma), p).tolist(),
                    "theta": self.theta(p),
                }
                for p in points
            ]
        return out


def _tidy(x: float):
    q = Fraction(x).limit_denominator(10_000)
    return q if abs(float(q) - x) <= 1e-12 * max(1.0, abs(x)) else x


def _slope(delta: Sequence[float]) -> float:
    vals = np.asarray(delta, dtype=float)
    if np.ptp(vals) > 1e-9 * max(1.0, float(np.max(np.abs(vals)))):
        raise ArithmeticError("extension is not affine with constant slope in the probe")
    return float(vals.mean())


def symbol_to_operator_report(S: UpperMetric, P: ProjectiveClass, probe=None) -> SymbolReport:
    """gamma and theta determined by the weight-zero extension.

    gamma: the base drift of the extension, restricted to weight-zero
    densities, must equal the drift of the projective Laplacian on M.
    theta: the fibre drift at t = 1 must equal d_i gamma^i.
    Both conditions are affine in (gamma, theta); the slopes are probed
    numerically and then the conditions are solved symbolically.
    """
    n = P.dim
    probe = list(probe) if probe is not None else [0.4 + 0.17 * k for k in range(n)]
    zero_gamma = [0.0] * n
    base = extend_to_densities(BracketData.build(S, zero_gamma, 0.0), P)
    e0 = [1.0] + [0.0] * (n - 1)
    unit = extend_to_densities(BracketData.build(S, e0, 0.0), P)
    b0 = evaluate_many(base.base_drift(), probe)
    b1 = evaluate_many(unit.base_drift(), probe)
    slope = _tidy(_slope([b1[0] - b0[0]]))
    if abs(b1[1:] - b0[1:]).max(initial=0.0) > 1e-9:
        raise ArithmeticError("gamma couples across components in the base drift")
    target = projective_laplacian(P, S).drift
    gamma = [(target[i] - base.base_drift()[i]) / float(slope) for i in range(n)]

    with_gamma = extend_to_densities(BracketData.build(S, gamma, 0.0), P)
    with_theta = extend_to_densities(BracketData.build(S, gamma, 1.0), P)
    d0 = with_gamma.fibre_drift()
    t_slope = _tidy(_slope([with_theta.fibre_drift()(probe) - d0(probe)]))
    div_gamma = field_sum([gamma[i].derive(i) for i in range(n)], n)
    theta = (div_gamma - d0) / float(t_slope)
    return SymbolReport(tuple(gamma), theta, slope, t_slope)


def operator_from_report(S: UpperMetric, P: ProjectiveClass, weight=0) -> HatOperator:
    report = symbol_to_operator_report(S, P)
    return extend_to_densities(BracketData.build(S, report.gamma, report.theta, as_weight(weight)), P)
