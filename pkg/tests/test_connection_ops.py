import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from chart_core import SingularMetricError, VectorField, coordinate_field, scaled_field
from connection_ops import (
    ConnectionField,
    MetricField,
    christoffel_difference,
    constant_connection,
    covariant_derivative,
    curvature,
    dual_connection,
    duality_pairing_defect,
    flat_connection,
    levi_civita,
    metric_compatibility_defect,
    torsion,
)
from gallery import hyperbolic_christoffel, random_vector_field

H2 = MetricField(lambda x: np.eye(2) / x[1] ** 2, 2, "H2")
UPPER = lambda x: x[1] > 0


def test_levi_civita_matches_hyperbolic_closed_form():
    lc = levi_civita(H2, domain=UPPER)
    for p in ([0.0, 2.0], [0.7, 0.9], [-1.0, 3.5]):
        assert_allclose(lc.christoffel(p), hyperbolic_christoffel(np.array(p)), atol=1e-6)


def test_hyperbolic_christoffel_values():
    gamma = hyperbolic_christoffel(np.array([0.0, 2.0]))
    # Gamma^x_xy = -1/y, Gamma^y_xx = 1/y, Gamma^y_yy = -1/y
    assert gamma[0, 0, 1] == pytest.approx(-0.5)
    assert gamma[1, 0, 0] == pytest.approx(0.5)
    assert gamma[1, 1, 1] == pytest.approx(-0.5)
    assert gamma[0, 0, 0] == 0.0


def test_covariant_derivative_of_coordinate_fields():
    conn = constant_connection(np.arange(8.0).reshape(2, 2, 2))
    value = covariant_derivative(conn, coordinate_field(2, 0), coordinate_field(2, 1), [0.0, 0.0])
    assert_allclose(value, [1.0, 5.0])


def test_hyperbolic_curvature_sign_convention():
    conn = levi_civita(H2, domain=UPPER)
    dx, dy = coordinate_field(2, 0), coordinate_field(2, 1)
    assert_allclose(curvature(conn, dx, dy, dx, [0.0, 2.0], domain=UPPER), [0.0, -0.25], atol=1e-5)


def test_flat_connection_has_no_curvature_or_torsion():
    conn = flat_connection(3)
    X, Y, Z = (random_vector_field(3, s) for s in (1, 2, 3))
    p = np.array([0.1, 0.2, 0.3])
    assert_allclose(curvature(conn, X, Y, Z, p), np.zeros(3), atol=1e-6)
    assert_allclose(torsion(conn, X, Y, p), np.zeros(3), atol=1e-8)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_curvature_antisymmetric_in_first_pair(seed):
    conn = constant_connection(np.random.default_rng(seed).normal(size=(2, 2, 2)))
    X, Y, Z = (random_vector_field(2, seed + k) for k in range(3))
    p = np.array([0.2, -0.1])
    assert_allclose(curvature(conn, X, Y, Z, p), -curvature(conn, Y, X, Z, p), atol=1e-5)


def test_torsion_of_asymmetric_constant_connection():
    gamma = np.zeros((2, 2, 2))
    gamma[0, 0, 1] = 1.0
    conn = constant_connection(gamma)
    value = torsion(conn, coordinate_field(2, 0), coordinate_field(2, 1), [0.0, 0.0])
    assert_allclose(value, [1.0, 0.0], atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_levi_civita_is_metric_compatible(seed):
    lc = levi_civita(H2, domain=UPPER)
    X, Y, Z = (random_vector_field(2, seed + k) for k in range(3))
    p = np.array([0.3, 1.7])
    assert metric_compatibility_defect(H2, lc, X, Y, Z, p, domain=UPPER) == pytest.approx(0.0, abs=1e-6)


def test_dual_of_levi_civita_is_itself():
    lc = levi_civita(H2, domain=UPPER)
    dual = dual_connection(H2, lc, domain=UPPER)
    assert_allclose(christoffel_difference(dual, lc, [0.4, 1.2]), np.zeros((2, 2, 2)), atol=1e-6)


def test_dual_pairing_and_involution():
    K = np.random.default_rng(5).normal(scale=0.3, size=(2, 2, 2))
    conn = levi_civita(H2, domain=UPPER).perturbed(lambda x: K)
    dual = dual_connection(H2, conn, domain=UPPER)
    p = np.array([0.2, 1.5])
    X, Y, Z = (random_vector_field(2, k) for k in (7, 8, 9))
    assert duality_pairing_defect(H2, conn, dual, X, Y, Z, p, domain=UPPER) == pytest.approx(0.0, abs=1e-6)
    back = dual_connection(H2, dual, domain=UPPER)
    assert_allclose(back.christoffel(p), conn.christoffel(p), atol=1e-6)
    assert_allclose(christoffel_difference(conn, levi_civita(H2, domain=UPPER), p), K, atol=1e-7)


class TestMetricField:

    def test_singular_metric_raises(self):
        g = MetricField(lambda x: np.diag([1.0, 0.0]), 2, "degenerate")
        with pytest.raises(SingularMetricError):
            g.inverse([0.0, 0.0])

    def test_asymmetric_metric_raises(self):
        g = MetricField(lambda x: np.array([[1.0, 0.5], [0.0, 1.0]]), 2)
        with pytest.raises(SingularMetricError):
            g.check_spd([0.0, 0.0])

    def test_wrong_shape_raises(self):
        g = MetricField(lambda x: np.eye(3), 2)
        with pytest.raises(SingularMetricError):
            g.solve([0.0, 0.0], [1.0, 0.0])

    def test_solve_and_inner(self):
        assert_allclose(H2.solve([0.0, 2.0], [1.0, 1.0]), [4.0, 4.0])
        assert H2.inner([0.0, 2.0], [1.0, 0.0], [1.0, 0.0]) == pytest.approx(0.25)


def test_curvature_warns_when_step_doubling_estimate_is_large(log_messages):
    conn = levi_civita(H2, domain=UPPER)
    dx, dy = coordinate_field(2, 0), coordinate_field(2, 1)
    curvature(conn, dx, dy, dx, [0.0, 1.0], h=1e-2, domain=UPPER, tolerance=1e-30)
    assert any("estimated FD error" in m for m in log_messages)


def test_christoffel_shape_is_checked():
    with pytest.raises(ValueError):
        ConnectionField(lambda x: np.zeros((2, 2)), 2).christoffel([0.0, 0.0])


def test_covariant_field_of_scaled_field():
    # nabla_X (f Y) = X(f) Y + f nabla_X Y
    conn = constant_connection(np.random.default_rng(2).normal(size=(2, 2, 2)))
    X, Y = random_vector_field(2, 11), random_vector_field(2, 12)
    f = lambda x: np.sin(x[0]) + x[1] ** 2
    fY = VectorField(lambda x: f(x) * Y(x))
    p = np.array([0.3, 0.4])
    Xf = X(p) @ np.array([np.cos(0.3), 0.8])
    expected = Xf * Y(p) + f(p) * covariant_derivative(conn, X, Y, p)
    assert_allclose(covariant_derivative(conn, X, fY, p), expected, atol=1e-7)


def test_curvature_is_tensorial_in_first_slot():
    conn = levi_civita(H2, domain=UPPER)
    X, Y, Z = (random_vector_field(2, k) for k in (21, 22, 23))
    f = lambda x: 1.0 + x[0] ** 2 + 0.5 * x[1]
    p = np.array([0.3, 1.6])
    scaled = curvature(conn, scaled_field(f, X), Y, Z, p, domain=UPPER)
    assert_allclose(scaled, f(p) * curvature(conn, X, Y, Z, p, domain=UPPER), atol=1e-5)
