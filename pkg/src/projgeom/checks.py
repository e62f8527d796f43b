"""Named invariance suites run by ``projgeom check``."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .connections import levi_civita, normal_omega0, normality_defect, pi_symbols, projective_shift
from .densities import UpperMetric, raised_trace_connection, upper_connection, weight_op
from .dynamics import fit_fractional_linear, parallel_transport
from .expr import as_field, evaluate_many, jets_many
from .geometry import scalar_to_chart, tensor2_to_chart, transform_connection
from .operators import projective_laplacian
from .scenario import Scenario, ScenarioError
from .thomas import lift_transition, thomas_lift


@dataclass(frozen=True)
class CheckResult:
    name: str
    defect: float
    tolerance: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.defect)) and self.defect <= self.tolerance

    def to_json(self) -> dict:
        out = {**asdict(self), "passed": self.passed}
        if not np.isfinite(self.defect):
            out["defect"] = None
        return out

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"{status}  {self.name:<34} defect {self.defect:.3e}  tol {self.tolerance:.1e}"
        return f"{line}  ({self.note})" if self.note else line


def _max_diff(pairs) -> float:
    return max((float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in pairs), default=0.0)


def shift_invariance(sc: Scenario) -> list[CheckResult]:
    tol = sc.tolerances["algebraic"]
    G = sc.connection()
    shifted = projective_shift(G, sc.theta())
    P, Q = pi_symbols(G), pi_symbols(shifted)
    pts = sc.points()
    S = sc.upper_metric()
    d_pi = _max_diff((P.at(p), Q.at(p)) for p in pts)
    d_op = projective_laplacian(P, S).coefficient_defect(projective_laplacian(Q, S), pts)
    return [
        CheckResult("shift-invariance/pi", d_pi, tol),
        CheckResult("shift-invariance/laplacian", d_op, tol),
    ]


def two_chart(sc: Scenario) -> list[CheckResult]:
    tol = sc.tolerances["two_chart"]
    T = sc.transition()
    pts = sc.points()
    T.check(pts)
    G = sc.connection()
    P_a = pi_symbols(G)
    P_b = pi_symbols(G.to_chart(T))
    S_a = sc.upper_metric()
    S_b = UpperMetric(tensor2_to_chart(S_a, T), sc.dim)
    f_a = as_field(sc.function(), sc.dim)
    f_b = scalar_to_chart(f_a, T)
    L_a, L_b = projective_laplacian(P_a, S_a), projective_laplacian(P_b, S_b)
    d_op = 0.0
    for p in pts:
        a, b = L_a.apply(f_a, p), L_b.apply(f_b, T(p))
        d_op = max(d_op, abs(a - b) / max(1.0, abs(a)))

    tilde_a, tilde_b = thomas_lift(P_a), thomas_lift(P_b)
    T_tilde, _ = lift_transition(T)
    d_lift = 0.0
    for p in pts:
        q = [0.3] + list(p)
        moved = transform_connection(tilde_a, T_tilde, q)
        d_lift = max(d_lift, float(np.max(np.abs(moved - tilde_b.at(T_tilde(q))))))
    return [
        CheckResult("two-chart/laplacian", d_op, tol),
        CheckResult("two-chart/thomas-lift", d_lift, tol),
    ]


def remark_equality(sc: Scenario) -> list[CheckResult]:
    g = sc.metric()
    n = sc.dim
    G = levi_civita(g, n, sc.points())
    gamma = upper_connection(pi_symbols(G), UpperMetric.inverse_of(g, n))
    raised = raised_trace_connection(g, n)
    d = _max_diff((evaluate_many(gamma, p), evaluate_many(raised, p)) for p in sc.points())
    return [CheckResult("remark-equality", d, sc.tolerances["algebraic"])]


def normality(sc: Scenario) -> list[CheckResult]:
    G = sc.connection()
    pts = sc.points()
    d = normality_defect(G, normal_omega0(G, pts), pts)
    return [CheckResult("normality", d, sc.tolerances["algebraic"])]


def weight_derivation(sc: Scenario) -> list[CheckResult]:
    tol = sc.tolerances["algebraic"]
    a, b = sc.densities()
    lhs = weight_op(a * b)
    rhs = weight_op(a) * b + a * weight_op(b)
    diff = lhs - rhs
    pts = sc.points()
    d_rule = max((abs(v) for p in pts for v in diff.values(p).values()), default=0.0)
    hat = a.hat_field()
    w_hat = weight_op(a).hat_field()
    d_real = 0.0
    for p in pts:
        q = [1.7] + list(p)
        jet = jets_many([hat], q)[0]
        d_real = max(d_real, abs(q[0] * jet.grad[0] - w_hat(q)))
    return [
        CheckResult("weight-derivation/leibniz", d_rule, tol),
        CheckResult("weight-derivation/t-dt", d_real, tol),
    ]


def fractional_linearity(sc: Scenario) -> list[CheckResult]:
    E, base, opts = sc.transport()
    rng = np.random.default_rng(opts["seed"])
    pairs = []
    for _ in range(opts["pairs"]):
        xi = rng.uniform(-0.5, 0.5, E.fibre_dim)
        pairs.append((xi, parallel_transport(E, base, xi, opts["T"], opts["h"]).end))
    _, residual = fit_fractional_linear(pairs, E.fibre_dim)
    return [CheckResult("fractional-linearity", residual, sc.tolerances["fit"])]


SUITES: dict[str, Callable[[Scenario], list[CheckResult]]] = {
    "fractional-linearity": fractional_linearity,
    "normality": normality,
    "remark-equality": remark_equality,
    "shift-invariance": shift_invariance,
    "two-chart": two_chart,
    "weight-derivation": weight_derivation,
}


REQUIRES = {
    "fractional-linearity": "transport",
    "remark-equality": "metric",
    "two-chart": "transition",
}


def applicable_suites(sc: Scenario) -> list[str]:
    return [name for name in sorted(SUITES) if REQUIRES.get(name) is None or sc.has(REQUIRES[name])]


def run_suites(sc: Scenario, names) -> list[CheckResult]:
    results = []
    for name in sorted(set(names)):
        try:
            results.extend(SUITES[name](sc))
        except (ArithmeticError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            results.append(CheckResult(name, float("inf"), 0.0, f"{type(exc).__name__}: {exc}"))
    return sorted(results, key=lambda r: r.name)
