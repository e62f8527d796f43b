import math

import numpy as np
import pytest

from projgeom.connections import Connection, levi_civita
from projgeom.expr import ScalarField, parse
from projgeom.geometry import (
    Chart,
    GeometryError,
    SingularJacobianError,
    TransitionError,
    TransitionMap,
    compose,
    connection_to_chart,
    jacobian,
    oneform_to_chart,
    scalar_to_chart,
    tensor2_to_chart,
    transform_connection,
    transform_oneform,
    transform_tensor2,
    transform_vector,
)

from conftest import POLAR, polar_transition, random_connection


def cart_to_polar():
    return polar_transition().inverted()


def test_identity_jacobian():
    J, det, mod = jacobian(TransitionMap.identity(3), [0.2, 0.5, -1.0])
    assert np.array_equal(J, np.eye(3))
    assert mod == 1.0


def test_polar_jacobian_determinant():
    _, det, _ = jacobian(polar_transition(), [2.0, 0.0])
    assert det == pytest.approx(2.0)


def test_collapse_is_singular():
    T = TransitionMap(["x0", "x0"], ["x0", "x1"])
    with pytest.raises(SingularJacobianError):
        jacobian(T, [1.0, 1.0])


def test_flat_stays_flat_under_linear_map():
    T = TransitionMap.linear([[2.0, 1.0], [0.5, 3.0]], [1.0, -2.0])
    out = transform_connection(Connection.zero(2), T, [0.3, 0.4])
    assert np.max(np.abs(out)) == 0.0


def test_cartesian_to_polar_connection():
    T = cart_to_polar()
    p = [1.2, 0.9]
    r = math.hypot(*p)
    G = transform_connection(Connection.zero(2), T, p)
    assert G[0, 1, 1] == pytest.approx(-r, abs=1e-12)
    assert G[1, 0, 1] == pytest.approx(1 / r, abs=1e-12)
    oracle = levi_civita(POLAR).at(T(p))
    assert np.allclose(G, oracle, atol=1e-12)


def test_transform_roundtrip(rng):
    conn = random_connection(rng, 2)
    T = polar_transition()
    p = [1.7, 0.4]
    there = Connection(connection_to_chart(conn, T), 2)
    back = transform_connection(there, T.inverted(), T(p))
    assert np.allclose(back, conn.at(p), atol=1e-9)


def test_symbolic_and_pointwise_laws_agree(rng):
    conn = random_connection(rng, 2)
    T = polar_transition()
    p = [1.3, -0.6]
    symbolic = Connection(connection_to_chart(conn, T), 2).at(T(p))
    assert np.allclose(symbolic, transform_connection(conn, T, p), atol=1e-12)


def test_orthogonal_map_preserves_identity_tensor():
    c, s = math.cos(0.7), math.sin(0.7)
    T = TransitionMap.linear([[c, -s], [s, c]])
    S = [["1", "0"], ["0", "1"]]
    assert np.allclose(transform_tensor2(S, T, [0.1, 0.2]), np.eye(2), atol=1e-15)


def test_exact_oneform_transforms_like_a_differential():
    f = parse("x0^2*sin(x1) + x1", 2)
    df = [f.derive(0), f.derive(1)]
    T = polar_transition()
    p = [1.4, 0.5]
    moved = transform_oneform(df, T, p)
    oracle = scalar_to_chart(f, T).jet(T(p)).grad
    assert np.allclose(moved, oracle, atol=1e-9)
    sym = [w(T(p)) for w in oneform_to_chart(df, T)]
    assert np.allclose(sym, oracle, atol=1e-9)


def test_tensor_roundtrip():
    S = [["1 + x0^2", "x1"], ["x1", "2"]]
    T = polar_transition()
    p = [1.5, 0.2]
    there = tensor2_to_chart(S, T)
    back = transform_tensor2(there, T.inverted(), T(p))
    assert np.allclose(back, [[1 + 1.5**2, 0.2], [0.2, 2.0]], atol=1e-9)


def test_vector_pushforward_matches_jacobian():
    T = polar_transition()
    J, _, _ = jacobian(T, [2.0, 0.3])
    v = np.array([0.4, -1.1])
    assert np.allclose(transform_vector(v, T, [2.0, 0.3]), J @ v, atol=1e-15)


def test_compose_with_inverse_is_identity():
    T = polar_transition()
    I = compose(T.inverted(), T)
    assert np.allclose(I([1.3, 0.2]), [1.3, 0.2], atol=1e-14)


def test_transition_check_rejects_bad_inverse():
    T = TransitionMap(["2*x0", "x1"], ["x0", "x1"])
    with pytest.raises(TransitionError):
        T.check([[1.0, 1.0]])


def test_transition_check_rejects_orientation_reversal():
    T = TransitionMap(["x1", "x0"], ["x1", "x0"])
    with pytest.raises(TransitionError):
        T.check([[1.0, 2.0]])


def test_chart_validation_and_sampling():
    with pytest.raises(GeometryError):
        Chart(1, ((0, 1),))
    ch = Chart(2, ((0, 1), (2, 3)))
    pts = ch.sample(50, seed=1)
    assert all(ch.contains(p) for p in pts)
    assert np.array_equal(pts, ch.sample(50, seed=1))


def test_linear_transition_fields():
    T = TransitionMap.linear([[2.0, 0.0], [0.0, 1.0]])
    assert T.det_field()([0.0, 0.0]) == 2.0
    assert isinstance(T.forward[0], ScalarField)
