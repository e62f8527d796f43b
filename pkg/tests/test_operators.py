import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projgeom.connections import ProjectiveClass, levi_civita, pi_symbols, projective_shift
from projgeom.densities import (
    BracketData,
    DensityElement,
    UpperMetric,
    as_hat_function,
    bracket_eval,
    upper_connection,
)
from projgeom.expr import ScalarField, evaluate_many, jets_many
from projgeom.geometry import TransitionMap, scalar_to_chart, tensor2_to_chart
from projgeom.operators import (
    SecondOrderOperator,
    extend_to_densities,
    polarization,
    projective_laplacian,
    symbol_to_operator_report,
    unit_fibre,
)
from projgeom.thomas import thomas_lift

from conftest import POLAR, SPHERE, polar_transition, random_connection, random_oneform, random_poly, random_upper

PTS = [[0.3, -0.4], [0.9, 0.2], [-0.6, 0.7]]


def flat_laplacian(n=2):
    return projective_laplacian(ProjectiveClass.zero(n), UpperMetric.identity(n))


def test_flat_laplacian():
    L = flat_laplacian()
    assert all(b.is_zero for b in L.drift) and L.zeroth.is_zero
    assert L.apply("x0^2", [0.3, 1.0]) == 2.0
    assert L.apply("x0^2 - x1^2", [0.3, 1.0]) == 0.0


def test_prefactor_in_two_dimensions(rng):
    S = random_upper(rng, 2)
    L = projective_laplacian(ProjectiveClass.zero(2), S)
    div = S.divergence()
    for p in PTS:
        assert np.allclose(evaluate_many(L.drift, p), 0.4 * evaluate_many(div, p), atol=1e-14)


def test_constants_are_annihilated(rng):
    L = projective_laplacian(pi_symbols(random_connection(rng, 3)), random_upper(rng, 3))
    assert L.apply(1.0, [0.1, 0.2, 0.3]) == 0.0


def test_apply_matches_finite_differences(rng):
    L = projective_laplacian(pi_symbols(random_connection(rng, 2)), random_upper(rng, 2))
    f = ScalarField.parse("sin(x0)*x1^2 + exp(x1)", 2)
    for p in PTS:
        exact, fd = L.apply(f, p), L.apply_fd(f, p, h=1e-3)
        assert abs(exact - fd) <= 1e-4 * max(1.0, abs(exact))
        assert L.apply_field(f)(p) == pytest.approx(exact, rel=1e-12, abs=1e-12)


@given(st.integers(0, 2**31), st.sampled_from([2, 3]))
@settings(max_examples=10, deadline=None)
def test_projective_invariance(seed, n):
    rng = np.random.default_rng(seed)
    G = random_connection(rng, n)
    S = random_upper(rng, n)
    L1 = projective_laplacian(pi_symbols(G), S)
    L2 = projective_laplacian(pi_symbols(projective_shift(G, random_oneform(rng, n))), S)
    pts = rng.uniform(-1, 1, (5, n)).tolist()
    assert L1.coefficient_defect(L2, pts) <= 1e-12


def test_polar_laplacian_is_the_flat_one():
    L = projective_laplacian(pi_symbols(levi_civita(POLAR)), UpperMetric.inverse_of(POLAR))
    r = 1.7
    S, b, _ = L.coefficients_at([r, 0.2])
    assert np.allclose(S, np.diag([1, 1 / r**2]))
    assert np.allclose(b, [1 / r, 0.0], atol=1e-14)


def test_two_chart_invariance(rng):
    G = random_connection(rng, 2)
    S = random_upper(rng, 2)
    T = polar_transition()
    L_a = projective_laplacian(pi_symbols(G), S)
    L_b = projective_laplacian(pi_symbols(G.to_chart(T)), UpperMetric(tensor2_to_chart(S, T), 2))
    f = ScalarField.parse("x0^2*sin(x1) + x1", 2)
    g = scalar_to_chart(f, T)
    for p in [[1.2, 0.3], [2.5, -0.9], [0.8, 1.2]]:
        a, b = L_a.apply(f, p), L_b.apply(g, T(p))
        assert abs(a - b) <= 1e-7 * max(1.0, abs(a))


# -- extension to densities ----------------------------------------------------------


def _direct_flat_extension(S, gamma, theta, phi: ScalarField, mu, x):
    """The projective Laplacian on M-hat written out by hand for P = 0, lambda = 0, constant S, gamma, theta.

    Nonzero symbols of the projective class of the hat connection:
      P^0_00 = -(n+2)/((n+1)t) + 4/((n+2)t),  P^k_k0 = P^k_0k = n/((n+1)(n+2)t).
    """
    n = len(x)
    N = n + 1
    t = 1.0
    Pi = np.zeros((N, N, N))
    Pi[0, 0, 0] = -(n + 2) / ((n + 1) * t) + 4 / ((n + 2) * t)
    for k in range(1, N):
        Pi[k, k, 0] = Pi[k, 0, k] = n / ((n + 1) * (n + 2) * t)
    Sh = np.zeros((N, N))
    Sh[1:, 1:] = S
    Sh[0, 1:] = Sh[1:, 0] = np.asarray(gamma) * t
    Sh[0, 0] = theta * t**2
    dS = np.zeros(N)  # d_J S^IJ: only d_t of the fibre row is nonzero
    dS[0] = 2 * theta * t
    dS[1:] = np.asarray(gamma)
    drift = 2 / (N + 3) * dS - (N + 1) / (N + 3) * np.einsum("jk,ijk->i", Sh, Pi)
    j = jets_many([phi], x)[0]
    val, grad, hess = j.value, j.grad, j.hess
    # phi t^mu at t = 1: derivatives in (t, x)
    G = np.concatenate([[mu * val], grad])
    H = np.zeros((N, N))
    H[0, 0] = mu * (mu - 1) * val
    H[0, 1:] = H[1:, 0] = mu * grad
    H[1:, 1:] = hess
    return float(np.sum(Sh * H) + drift @ G)


@pytest.mark.parametrize("mu", [Fraction(0), Fraction(1), Fraction(-3, 2)])
def test_flat_extension_against_direct_substitution(mu):
    S = np.eye(2)
    gamma, theta = [0.3, -0.7], 0.45
    B = BracketData.build(UpperMetric.identity(2), gamma, theta)
    D = extend_to_densities(B, ProjectiveClass.zero(2))
    phi = ScalarField.parse("sin(x0)*x1 + x1^3", 2)
    image = D.apply(DensityElement({mu: phi}, 2))
    assert image.weights <= {mu}
    for x in PTS:
        got = image.coefficient(mu)(x)
        assert got == pytest.approx(_direct_flat_extension(S, gamma, theta, phi, float(mu), x), abs=1e-12)


def test_flat_extension_restricts_to_flat_laplacian():
    B = BracketData.build(UpperMetric.identity(2))
    D = extend_to_densities(B, ProjectiveClass.zero(2))
    phi = ScalarField.parse("x0^3*x1", 2)
    image = D.apply(DensityElement({0: phi}, 2))
    for x in PTS:
        assert image.coefficient(0)(x) == pytest.approx(flat_laplacian().apply(phi, x), abs=1e-13)


@pytest.mark.parametrize("weight", [Fraction(0), Fraction(1), Fraction(-1, 2)])
def test_weight_grading(rng, weight):
    B = BracketData.build(random_upper(rng, 2), [random_poly(rng, 2) for _ in range(2)], random_poly(rng, 2), weight)
    D = extend_to_densities(B, pi_symbols(random_connection(rng, 2)))
    a = DensityElement({Fraction(1, 3): "x0*x1", 2: "x0 + 1"}, 2)
    assert D.apply(a).weights <= {Fraction(1, 3) + weight, 2 + weight}


def test_hat_apply_matches_pointwise_application(rng):
    B = BracketData.build(random_upper(rng, 2), [random_poly(rng, 2) for _ in range(2)], random_poly(rng, 2), 1)
    D = extend_to_densities(B, pi_symbols(random_connection(rng, 2)))
    a = DensityElement({Fraction(1, 2): "x0^2", -1: "x1"}, 2)
    image = D.apply(a)
    for t in (1.0, 2.3):
        q = [t, 0.4, -0.2]
        assert as_hat_function(image, q) == pytest.approx(D.apply_at(a, q), rel=1e-10)


def _monomials():
    out = []
    for mu in (Fraction(0), Fraction(1), Fraction(-1, 2)):
        for coeff in ("x0", "x1", "x0*x1", "1"):
            out.append(DensityElement({mu: coeff}, 2))
    return out


def test_generator_property(rng):
    S = random_upper(rng, 2)
    P = pi_symbols(random_connection(rng, 2))
    rep = symbol_to_operator_report(S, P)
    D = extend_to_densities(BracketData.build(S, rep.gamma, rep.theta), P)
    B = D.bracket()
    assert all(B.S[i, j] == S[i, j] for i in range(2) for j in range(2))
    worst = 0.0
    for a, b in itertools.combinations_with_replacement(_monomials(), 2):
        diff = polarization(D, a, b) - bracket_eval(B, a, b) * 2.0
        for x in PTS:
            worst = max([worst] + [abs(v) for v in diff.values(x).values()])
    assert worst <= 1e-9


def test_report_flat():
    rep = symbol_to_operator_report(UpperMetric.identity(2), ProjectiveClass.zero(2))
    assert rep.gamma_slope == Fraction(1, 9)
    assert rep.theta_slope == Fraction(8, 9)
    for x in PTS:
        assert np.allclose(evaluate_many(list(rep.gamma), x), 0.0)
        assert rep.theta(x) == 0.0


def test_report_gamma_matches_upcon_on_sphere():
    S = UpperMetric.inverse_of(SPHERE)
    P = pi_symbols(levi_civita(SPHERE))
    rep = symbol_to_operator_report(S, P)
    oracle = upper_connection(P, S)
    for x in [[0.7, 0.1], [1.2, -0.3], [2.2, 0.8]]:
        assert np.allclose(evaluate_many(list(rep.gamma), x), evaluate_many(oracle, x), atol=1e-8)


@pytest.mark.parametrize("n", [2, 3])
def test_report_theta_closed_form(rng, n):
    # theta = (n+1)/(n+2) (d_i gamma^i + S^jk G~^0_jk) with gamma from upcon
    S = random_upper(rng, n)
    P = pi_symbols(random_connection(rng, n))
    rep = symbol_to_operator_report(S, P)
    gamma = upper_connection(P, S)
    lift = thomas_lift(P)
    for x in rng.uniform(-1, 1, (3, n)).tolist():
        div = sum(gamma[i].derive(i)(x) for i in range(n))
        Sv = S.at(x)
        q0 = np.array([[lift[0, j + 1, k + 1]([0.0] + x) for k in range(n)] for j in range(n)])
        assert rep.theta(x) == pytest.approx((n + 1) / (n + 2) * (div + np.sum(Sv * q0)), rel=1e-9, abs=1e-9)


def test_report_theta_symmetric_under_relabeling():
    S = UpperMetric([["1 + x0^2", "x0*x1"], ["x0*x1", "1 + x1^2"]], 2)
    G = levi_civita([["1 + x1^2", "0"], ["0", "1 + x0^2"]])
    swap = TransitionMap(["x1", "x0"], ["x1", "x0"])
    rep = symbol_to_operator_report(S, pi_symbols(G))
    rep_swapped = symbol_to_operator_report(UpperMetric(tensor2_to_chart(S, swap), 2), pi_symbols(G.to_chart(swap)))
    for x in PTS:
        assert rep.theta(x) == pytest.approx(rep_swapped.theta(x[::-1]), rel=1e-10, abs=1e-12)


def test_unit_fibre_restriction():
    f = ScalarField.parse("x0^2*x1 + x2", 3)
    g = unit_fibre(f, 2)
    assert g([3.0, 4.0]) == 7.0


def test_operator_json_roundtrip_shapes(rng):
    L = projective_laplacian(pi_symbols(random_connection(rng, 2)), random_upper(rng, 2))
    data = L.to_json()
    assert len(data["principal"]) == 2 and len(data["drift"]) == 2
    assert isinstance(L, SecondOrderOperator)
