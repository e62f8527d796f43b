"""The algebra of densities, brackets and the upper connection on volume forms.

A density sum  sum_w phi_w (Dx)^w  is stored as a map from exact rational
weights to coefficient fields.  On M-hat it is realised as the function
sum_w phi_w t^w.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .connections import ProjectiveClass, levi_civita
from .expr import ScalarField, as_field, evaluate_many, field_sum, jets_many
from .geometry import inverse_matrix
from .thomas import fibre, lift_field


def as_weight(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, float):
        return Fraction(w).limit_denominator(10**6)
    return Fraction(str(w)) if isinstance(w, str) else Fraction(w)


class DensityElement:
    """Finite formal sum of weighted densities."""

    __slots__ = ("dim", "terms")

    def __init__(self, terms: Mapping | Iterable, dim: int):
        self.dim = dim
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[Fraction, ScalarField] = {}
        for w, coeff in items:
            w = as_weight(w)
            c = as_field(coeff, dim)
            merged[w] = merged[w] + c if w in merged else c
        self.terms = {w: c for w, c in sorted(merged.items()) if not c.is_zero}

    @classmethod
    def scalar(cls, coeff, dim: int, weight=0) -> "DensityElement":
        return cls({weight: coeff}, dim)

    @classmethod
    def one(cls, dim: int) -> "DensityElement":
        return cls({0: 1.0}, dim)

    @classmethod
    def volume(cls, dim: int, power=1) -> "DensityElement":
        """(Dx)^power."""
        return cls({power: 1.0}, dim)

    @classmethod
    def from_json(cls, items: Sequence[Mapping], dim: int) -> "DensityElement":
        return cls([(it["weight"], it["coeff"]) for it in items], dim)

    def to_json(self) -> list[dict]:
        return [{"weight": str(w), "coeff": c.text} for w, c in self.terms.items()]

    @property
    def weights(self) -> frozenset[Fraction]:
        return frozenset(self.terms)

    def coefficient(self, w) -> ScalarField:
        return self.terms.get(as_weight(w), ScalarField.constant(0.0, self.dim))

    def __repr__(self) -> str:
        body = " + ".join(f"({c.text})(Dx)^{w}" for w, c in self.terms.items()) or "0"
        return f"DensityElement({body})"

    def __add__(self, other: "DensityElement") -> "DensityElement":
        return DensityElement(list(self.terms.items()) + list(other.terms.items()), self.dim)

    def __sub__(self, other: "DensityElement") -> "DensityElement":
        return self + other.scaled(-1.0)

    def __mul__(self, other) -> "DensityElement":
        if isinstance(other, DensityElement):
            return density_mul(self, other)
        return self.scaled(other)

    __rmul__ = __mul__

    def scaled(self, c) -> "DensityElement":
        return DensityElement({w: f * c for w, f in self.terms.items()}, self.dim)

    def values(self, point: Sequence[float]) -> dict[Fraction, float]:
        ws = list(self.terms)
        vals = evaluate_many([self.terms[w] for w in ws], point)
        return dict(zip(ws, map(float, vals)))

    def hat_field(self) -> ScalarField:
        """sum phi_w t^w as a field on the (n+1)-dim M-hat chart."""
        t = fibre(self.dim)
        return field_sum([lift_field(c) * t**w for w, c in self.terms.items()], self.dim + 1)


def density_mul(a: DensityElement, b: DensityElement) -> DensityElement:
    """(phi (Dx)^w1)(chi (Dx)^w2) = phi chi (Dx)^(w1 + w2), bilinearly."""
    return DensityElement(
        [(w1 + w2, f * g) for w1, f in a.terms.items() for w2, g in b.terms.items()], a.dim
    )


def weight_op(a: DensityElement) -> DensityElement:
    """w(phi (Dx)^l) = l phi (Dx)^l."""
    return DensityElement({w: float(w) * c for w, c in a.terms.items()}, a.dim)


def as_hat_function(a: DensityElement, p_hat: Sequence[float]) -> float:
    """Value of sum phi_w(x) t^w at p^ = (t, x)."""
    t = float(p_hat[0])
    if not t > 0:
        raise ValueError(f"fibre coordinate t must be positive, got {t!r}")
    x = list(p_hat[1:])
    return float(sum(v * t ** float(w) for w, v in a.values(x).items()))


# -- brackets ------------------------------------------------------------------


class UpperMetric:
    """Symmetric contravariant 2-tensor S^ij; may be degenerate."""

    def __init__(self, components, dim: int | None = None):
        n = dim or len(components)
        comps = [[as_field(components[i][j], n) for j in range(n)] for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if comps[i][j] != comps[j][i]:
                    a, b = comps[i][j], comps[j][i]
                    p = [0.5 + 0.1 * k for k in range(n)]
                    if abs(a(p) - b(p)) > 1e-12 * max(1.0, abs(a(p))):
                        raise ValueError(f"S^{i}{j} != S^{j}{i}")
                    comps[j][i] = a
        self.dim = n
        self.components = comps

    @classmethod
    def identity(cls, dim: int) -> "UpperMetric":
        return cls([[1.0 if i == j else 0.0 for j in range(dim)] for i in range(dim)], dim)

    @classmethod
    def inverse_of(cls, metric, dim: int | None = None) -> "UpperMetric":
        n = dim or len(metric)
        g = [[as_field(metric[i][j], n) for j in range(n)] for i in range(n)]
        inv, _ = inverse_matrix(g, n)
        return cls(inv, n)

    def __getitem__(self, idx) -> ScalarField:
        i, j = idx
        return self.components[i][j]

    def at(self, point) -> np.ndarray:
        n = self.dim
        flat = [self.components[i][j] for i in range(n) for j in range(n)]
        return evaluate_many(flat, point).reshape(n, n)

    def divergence(self) -> list[ScalarField]:
        """d_j S^ij (coordinate divergence)."""
        n = self.dim
        return [field_sum([self.components[i][j].derive(j) for j in range(n)], n) for i in range(n)]

    def texts(self) -> list[list[str]]:
        return [[f.text for f in row] for row in self.components]


@dataclass(frozen=True)
class BracketData:
    """A homogeneous bracket of weight ``weight`` given by (S, gamma, theta)."""

    weight: Fraction
    S: UpperMetric
    gamma: tuple[ScalarField, ...]
    theta: ScalarField

    @classmethod
    def build(cls, S: UpperMetric, gamma=None, theta=None, weight=0) -> "BracketData":
        n = S.dim
        gamma = tuple(as_field(g, n) for g in (gamma if gamma is not None else [0.0] * n))
        if len(gamma) != n:
            raise ValueError("gamma needs one component per coordinate")
        theta = as_field(theta if theta is not None else 0.0, n)
        return cls(as_weight(weight), S, gamma, theta)

    @property
    def dim(self) -> int:
        return self.S.dim


def _bracket_terms(B: BracketData, phi: ScalarField, mu: Fraction, chi: ScalarField, nu: Fraction) -> ScalarField:
    n = B.dim
    S = B.S.components
    dphi = [phi.derive(i) for i in range(n)]
    dchi = [chi.derive(i) for i in range(n)]
    terms = [S[i][j] * dphi[i] * dchi[j] for i in range(n) for j in range(n)]
    if mu:
        terms += [float(mu) * phi * B.gamma[j] * dchi[j] for j in range(n)]
    if nu:
        terms += [float(nu) * chi * B.gamma[j] * dphi[j] for j in range(n)]
    if mu and nu:
        terms.append(float(mu * nu) * phi * chi * B.theta)
    return field_sum(terms, n)


def bracket_eval(B: BracketData, a: DensityElement, b: DensityElement) -> DensityElement:
    """The symmetric biderivation with {x^i,x^j} = S^ij (Dx)^l,
    {x^i, Dx} = gamma^i (Dx)^(l+1), {Dx, Dx} = theta (Dx)^(l+2)."""
    return DensityElement(
        [
            (B.weight + mu + nu, _bracket_terms(B, phi, mu, chi, nu))
            for mu, phi in a.terms.items()
            for nu, chi in b.terms.items()
        ],
        B.dim,
    )


# -- upper connections -------------------------------------------------------------


def upper_connection(P: ProjectiveClass, S: UpperMetric) -> list[ScalarField]:
    """gamma^i = (n+1)/(n+3) (d_j S^ij + S^jk P^i_jk)."""
    n = P.dim
    div = S.divergence()
    c = (n + 1) / (n + 3)
    out = []
    for i in range(n):
        contr = field_sum(
            [S.components[j][k] * P.coeffs[i][j][k] for j in range(n) for k in range(n)], n
        )
        out.append(c * (div[i] + contr))
    return out


def raised_trace_connection(metric, dim: int | None = None) -> list[ScalarField]:
    """g^ij G^k_kj for the Levi-Civita connection of ``metric``."""
    n = dim or len(metric)
    G = levi_civita(metric, n)
    ginv = UpperMetric.inverse_of(metric, n).components
    tr = G.trace()
    return [field_sum([ginv[i][j] * tr[j] for j in range(n)], n) for i in range(n)]


def volume_connection(gamma, S: UpperMetric, omega, sigma) -> ScalarField:
    """nabla^omega sigma = S^ji omega_j d_i sigma + gamma^i omega_i sigma."""
    n = S.dim
    terms = [S.components[j][i] * omega[j] * sigma.derive(i) for i in range(n) for j in range(n)]
    terms += [gamma[i] * omega[i] * sigma for i in range(n)]
    return field_sum(terms, n)


def upper_connection_axioms_check(gamma, S: UpperMetric, omega, sigma, f, points) -> float:
    """Largest violation of the two upper-connection axioms at ``points``.

    nabla^(f omega) sigma = f nabla^omega sigma
    nabla^omega (f sigma) = f nabla^omega sigma + (S# omega)(f) sigma
    """
    n = S.dim
    gamma = [as_field(g, n) for g in gamma]
    omega = [as_field(w, n) for w in omega]
    sigma, f = as_field(sigma, n), as_field(f, n)
    base = volume_connection(gamma, S, omega, sigma)
    scaled_form = volume_connection(gamma, S, [f * w for w in omega], sigma)
    scaled_section = volume_connection(gamma, S, omega, f * sigma)
    worst = 0.0
    for p in points:
        b, sf, ss = evaluate_many([base, scaled_form, scaled_section], p)
        fv = f(p)
        s_mat = S.at(p)
        w = evaluate_many(omega, p)
        df = jets_many([f], p)[0].grad
        sharp = float(w @ s_mat @ df)
        sv = sigma(p)
        worst = max(worst, abs(sf - fv * b), abs(ss - fv * b - sharp * sv))
    return worst
