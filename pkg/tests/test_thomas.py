import math

import numpy as np
import pytest

from projgeom.connections import ProjectiveClass, levi_civita, pi_symbols
from projgeom.geometry import TransitionMap, transform_connection
from projgeom.thomas import (
    F_inverse,
    F_map,
    F_transition,
    Flavor,
    LiftError,
    hat_connection,
    lift_transition,
    thomas_lift,
    weight_vector_field_check,
)

from conftest import SPHERE, polar_transition, random_connection


def test_flat_lift_is_the_t2_block():
    L = thomas_lift(ProjectiveClass.zero(2))
    assert L.flavor is Flavor.TILDE
    v = L.at([0.4, 0.1, -0.3])
    expected = np.zeros((3, 3, 3))
    for k in range(3):
        expected[k, k, 0] = expected[k, 0, k] = -1 / 3
    assert np.array_equal(v, expected)


def test_t3_block_sphere_direct_substitution():
    P = pi_symbols(levi_civita(SPHERE))
    L = thomas_lift(P)
    h = 1e-5
    n = 2
    for x in [[0.7, 0.2], [1.3, -0.5], [2.1, 0.9]]:
        p = np.array(x)
        Pv = P.at(p)
        div = np.zeros((n, n))
        for r in range(n):
            e = np.zeros(n)
            e[r] = h
            div += (P.at(p + e)[r] - P.at(p - e)[r]) / (2 * h)
        quad = np.einsum("rsi,srj->ij", Pv, Pv)
        oracle = (n + 1) / (n - 1) * (div - quad)
        assert np.allclose(L.at([0.0] + x)[0, 1:, 1:], oracle, atol=1e-8)


def test_identity_lifts_to_identity():
    tilde, hat = lift_transition(TransitionMap.identity(2))
    q = [0.7, 0.2, -0.4]
    assert np.allclose(tilde(q), q) and np.allclose(hat(q), q)


def test_linear_lift():
    T = TransitionMap.linear([[2.0, 0.0], [0.0, 1.0]])
    tilde, hat = lift_transition(T)
    assert tilde([0.5, 1.0, 1.0])[0] == pytest.approx(0.5 + math.log(2))
    assert hat([3.0, 1.0, 1.0])[0] == pytest.approx(6.0)


def test_polar_lift_scales_fibre_by_radius():
    _, hat = lift_transition(polar_transition())
    assert hat([1.5, 2.0, 0.3])[0] == pytest.approx(3.0)


def test_F_map_values():
    assert np.allclose(F_map([1.0, 0.3, 0.4]), [0.0, 0.3, 0.4])
    assert np.allclose(F_map([math.e, 0.3, 0.4]), [1.0, 0.3, 0.4])
    assert np.allclose(F_inverse(F_map([2.5, 1.0, -1.0])), [2.5, 1.0, -1.0])
    with pytest.raises(LiftError):
        F_map([0.0, 1.0, 1.0])


def test_F_equivariance():
    T = TransitionMap.linear([[2.0, 0.0], [0.3, 1.0]])
    tilde, hat = lift_transition(T)
    for q in [[0.5, 0.1, 0.2], [3.0, -1.0, 0.4]]:
        assert np.allclose(F_map(hat(q)), tilde(F_map(q)), atol=1e-14)
        assert np.allclose(F_map(q)[1:], q[1:])


def test_hat_flat_values_at_unit_fibre():
    v = hat_connection(ProjectiveClass.zero(2)).at([1.0, 0.2, 0.3])
    assert v[0, 0, 0] == pytest.approx(-4 / 3)
    assert v[1, 1, 0] == pytest.approx(-1 / 3)
    assert v[2, 0, 2] == pytest.approx(-1 / 3)
    oracle = transform_connection(thomas_lift(ProjectiveClass.zero(2)), F_transition(2).inverted(), [0.0, 0.2, 0.3])
    assert np.allclose(v, oracle, atol=1e-14)


def test_hat_closed_form(rng):
    P = pi_symbols(random_connection(rng, 2))
    tilde, hat = thomas_lift(P), hat_connection(P)
    t, x = 2.3, [0.3, -0.2]
    H, Tl = hat.at([t] + x), tilde.at([math.log(t)] + x)
    assert H[0, 0, 0] == pytest.approx(-4 / (3 * t))
    assert np.allclose(H[1:, 1:, 0], -np.eye(2) / (3 * t))
    assert np.allclose(H[0, 1:, 1:], t * Tl[0, 1:, 1:], atol=1e-12)
    assert np.allclose(H[1:, 1:, 1:], P.at(x), atol=1e-12)


def test_hat_transforms_back_to_tilde(rng):
    P = pi_symbols(random_connection(rng, 2))
    hat, tilde = hat_connection(P), thomas_lift(P)
    q = [1.8, 0.1, 0.5]
    moved = transform_connection(hat, F_transition(2), q)
    assert np.allclose(moved, tilde.at(F_map(q)), atol=1e-10)


@pytest.mark.parametrize("flavor", ["tilde", "hat"])
def test_two_chart_lift_law(rng, flavor):
    G = random_connection(rng, 2)
    T = polar_transition()
    P_a, P_b = pi_symbols(G), pi_symbols(G.to_chart(T))
    T_tilde, T_hat = lift_transition(T)
    build, Tl, fib = (thomas_lift, T_tilde, 0.4) if flavor == "tilde" else (hat_connection, T_hat, 1.6)
    A, B = build(P_a), build(P_b)
    for x in [[1.5, 0.2], [2.2, -0.7], [1.1, 1.0]]:
        q = [fib] + x
        assert np.max(np.abs(transform_connection(A, Tl, q) - B.at(Tl(q)))) <= 1e-8


def test_t2_block_stable_under_lifted_transition(rng):
    P = pi_symbols(random_connection(rng, 2))
    T_tilde, _ = lift_transition(polar_transition())
    moved = transform_connection(thomas_lift(P), T_tilde, [0.2, 1.4, 0.3])
    assert np.allclose(moved[:, :, 0], -np.eye(3) / 3, atol=1e-8)


def test_weight_field_pushforward():
    assert np.allclose(weight_vector_field_check([1.0, 0.2, 0.3]), [1, 0, 0])
    assert np.allclose(weight_vector_field_check([7.3, 0.2, 0.3]), [1, 0, 0], atol=1e-15)
    not_weight = weight_vector_field_check([2.0, 0.2, 0.3], direction=[1.0, 0.0, 0.0])
    assert np.allclose(not_weight, [0.5, 0, 0])
