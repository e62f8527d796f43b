"""Shared fixtures and random generators for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from projgeom.connections import Connection
from projgeom.expr import ScalarField, field_sum
from projgeom.geometry import TransitionMap

SPHERE = [["1", "0"], ["0", "sin(x0)^2"]]
POLAR = [["1", "0"], ["0", "x0^2"]]


def random_poly(rng, dim: int, degree: int = 2, scale: float = 0.5) -> ScalarField:
    """Random polynomial of total degree <= 2 in x0..x{dim-1}."""
    xs = [ScalarField.coordinate(i, dim) for i in range(dim)]
    terms = [float(scale * rng.uniform(-1, 1))]
    terms += [float(scale * rng.uniform(-1, 1)) * x for x in xs]
    if degree >= 2:
        terms += [
            float(scale * rng.uniform(-1, 1)) * xs[i] * xs[j]
            for i in range(dim)
            for j in range(i, dim)
        ]
    return field_sum(terms, dim)


def random_connection(rng, dim: int) -> Connection:
    coeffs = [[[None] * dim for _ in range(dim)] for _ in range(dim)]
    for k in range(dim):
        for i in range(dim):
            for j in range(i, dim):
                coeffs[k][i][j] = coeffs[k][j][i] = random_poly(rng, dim)
    return Connection(coeffs, dim)


def random_oneform(rng, dim: int) -> list[ScalarField]:
    return [random_poly(rng, dim) for _ in range(dim)]


def random_upper(rng, dim: int):
    from projgeom.densities import UpperMetric

    comps = [[None] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(i, dim):
            comps[i][j] = comps[j][i] = random_poly(rng, dim)
    return UpperMetric(comps, dim)


def random_analytic_metric(rng, dim: int = 2) -> list[list[ScalarField]]:
    """Positive definite diagonal-dominant metric with analytic entries."""
    xs = [ScalarField.coordinate(i, dim) for i in range(dim)]
    g = [[None] * dim for _ in range(dim)]
    for i in range(dim):
        a, b = rng.uniform(0.2, 0.6, 2)
        g[i][i] = 2.0 + float(a) * xs[(i + 1) % dim].apply("sin") + float(b) * xs[i] ** 2
        for j in range(i + 1, dim):
            c = float(rng.uniform(-0.3, 0.3))
            g[i][j] = g[j][i] = c * (xs[i] + xs[j]).apply("cos")
    return g


def points(rng, dim: int, count: int = 20, lo: float = -1.0, hi: float = 1.0) -> list[list[float]]:
    return rng.uniform(lo, hi, (count, dim)).tolist()


def polar_transition() -> TransitionMap:
    """Polar (r, phi) -> Cartesian, valid for r > 0 and |phi| < pi/2."""
    return TransitionMap(
        ["x0*cos(x1)", "x0*sin(x1)"],
        ["sqrt(x0^2 + x1^2)", "atan(x1/x0)"],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance summary ----------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
