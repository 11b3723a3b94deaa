import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from geoquant import chartcalc as cc

R2 = cc.euclidean_space(1)
q, p = R2.coords("R")
OMEGA = cc.standard_symplectic_form(R2)
R3 = cc.real_space(3)
X1, X2, X3 = R3.coords("R")
SPHERE = cc.build_sphere_atlas()

small_int = st.integers(-3, 3)


def poly3(coeffs):
    """Quadratic polynomial in x1, x2, x3 from 10 coefficients."""
    mons = [1, X1, X2, X3, X1 * X2, X2 * X3, X1 * X3, X1**2, X2**2, X3**2]
    return sum(c * m for c, m in zip(coeffs, mons))


coeff_lists = st.lists(small_int, min_size=10, max_size=10)


# forms


def test_d_of_liouville_form():
    theta = cc.ChartForm(R2, 1, {"R": {(0,): p}})
    assert cc.exterior_derivative(theta).components["R"] == {(0, 1): -1}
    # dp ^ dq, stored on the sorted index (q, p) with a sign
    assert OMEGA.coefficient("R", (1, 0)) == 1


def test_wedge_antisymmetry_of_one_forms():
    dq = cc.ChartForm(R2, 1, {"R": {(0,): 1}})
    dp = cc.ChartForm(R2, 1, {"R": {(1,): 1}})
    assert cc.max_abs(cc.wedge(dq, dp) + cc.wedge(dp, dq)) == 0
    assert cc.max_abs(cc.wedge(dp, dq) - OMEGA) == 0


@given(coeff_lists, coeff_lists)
def test_d_squared_zero(a, b):
    alpha = cc.ChartForm(R3, 1, {"R": {(0,): poly3(a), (1,): sp.sin(X3) * poly3(b), (2,): X1 * X2}})
    assert cc.max_abs(cc.exterior_derivative(cc.exterior_derivative(alpha)), 40) == 0


@given(coeff_lists, coeff_lists)
def test_leibniz_rule(a, b):
    f = cc.ChartForm.scalar(R3, poly3(a))
    beta = cc.ChartForm(R3, 1, {"R": {(0,): poly3(b), (2,): X2}})
    lhs = cc.exterior_derivative(cc.wedge(f, beta))
    rhs = cc.wedge(cc.exterior_derivative(f), beta) + cc.wedge(f, cc.exterior_derivative(beta))
    assert cc.max_abs(lhs - rhs, 40) < 1e-9


@given(coeff_lists, coeff_lists)
def test_cartan_formula_property(a, b):
    X = cc.ChartVectorField(R3, {"R": [poly3(a), X3, -X1]})
    w = cc.ChartForm(R3, 2, {"R": {(0, 1): poly3(b), (1, 2): X1 * X3}})
    assert cc.max_abs(cc.lie_derivative(X, w) - cc.cartan_formula(X, w), 40) < 1e-9


def test_interior_product_of_scalar_rejected():
    with pytest.raises(cc.GeometryError, match="cannot contract a scalar"):
        cc.interior_product(cc.ChartVectorField.coordinate(R2, 0), cc.ChartForm.scalar(R2, q))


# Hamiltonian structure


def test_hamiltonian_vector_fields():
    Xq = cc.hamiltonian_vector_field(cc.ChartForm.scalar(R2, q), OMEGA)
    Xp = cc.hamiltonian_vector_field(cc.ChartForm.scalar(R2, p), OMEGA)
    assert tuple(Xq.components["R"]) == (0, -1)
    assert tuple(Xp.components["R"]) == (1, 0)
    # iota_X omega = -df
    f = cc.ChartForm.scalar(R2, q**2 * p + sp.sin(p))
    X = cc.hamiltonian_vector_field(f, OMEGA)
    assert cc.max_abs(cc.interior_product(X, OMEGA) + cc.exterior_derivative(f)) < 1e-12


def test_canonical_poisson_bracket():
    b = cc.poisson_bracket(cc.ChartForm.scalar(R2, q), cc.ChartForm.scalar(R2, p), OMEGA)
    assert b.scalar_expr("R") == -1


@given(coeff_lists)
def test_bracket_antisymmetry(a):
    R4 = cc.euclidean_space(2)
    q1, q2, p1, p2 = R4.coords("R")
    om = cc.standard_symplectic_form(R4)
    f = cc.ChartForm.scalar(R4, a[0] * q1**2 + a[1] * p2 * q1 + a[2] * p1**3)
    g = cc.ChartForm.scalar(R4, a[3] * q2 * p1 + a[4] * q1 + sp.cos(p2))
    assert cc.max_abs(cc.poisson_bracket(f, g, om) + cc.poisson_bracket(g, f, om), 40) < 1e-12


def test_degenerate_form_named_point():
    om = cc.ChartForm(R2, 2, {"R": {(0, 1): q}})
    X = cc.hamiltonian_vector_field(cc.ChartForm.scalar(R2, p), om)
    with pytest.raises(cc.DegenerateFormError, match=r"\[0\.0, 0\.5\]"):
        X.evaluate("R", np.array([[0.0, 0.5]]))


def test_kernel_identities():
    res = cc.kernel_identity_residuals(60)
    assert set(res) == {"d_squared", "cartan", "jacobi", "hamiltonian_bracket"}
    assert max(res.values()) <= 1e-9


# complex structure and Kahler data


def test_dz_wedge_dzbar():
    # z = q + i p: dz ^ dzbar = -2i dq ^ dp = 2i dp ^ dq
    dz = cc.ChartForm(R2, 1, {"R": {(0,): 1, (1,): sp.I}})
    dzb = cc.ChartForm(R2, 1, {"R": {(0,): 1, (1,): -sp.I}})
    w = cc.wedge(dz, dzb)
    assert sp.simplify(w.coefficient("R", (1, 0)) - 2 * sp.I) == 0


def test_dolbeault_splits_d():
    f = cc.ChartForm.scalar(R2, q**3 * p + sp.exp(q) * sp.sin(p))
    total = cc.dolbeault(f, "del") + cc.dolbeault(f, "delbar")
    assert cc.max_abs(total - cc.exterior_derivative(f)) < 1e-12


def test_flat_kahler_potential():
    # with z = q + i p, (i/2) del delbar |z|^2 = dq ^ dp, the opposite of dp ^ dq
    pot = cc.ChartForm.scalar(R2, q**2 + p**2)
    assert cc.max_abs(cc.kahler_form_from_potential(pot) + OMEGA) < 1e-12


def test_sphere_atlas_consistency():
    t = SPHERE.check_transitions()
    assert max(t.values()) < 1e-12
    c = SPHERE.check_complex_structure()
    assert max(c.values()) < 1e-12


def test_fubini_study_potential_and_covariance():
    fs = cc.fubini_study_form(SPHERE)
    k = cc.kahler_form_from_potential(cc.fubini_study_potential(SPHERE))
    assert cc.max_abs(k - fs) < 1e-8
    assert cc.form_covariance_residual(fs) < 1e-12


def test_transition_jacobian_at_point():
    J = SPHERE.transition_jacobian("N", "S", np.array([[1.0, 0.0]]))[0]
    # (x/r^2, -y/r^2) at (1, 0)
    assert np.allclose(J, [[-1.0, 0.0], [0.0, -1.0]])


# integration


def test_sphere_volume():
    res = cc.integrate_cycle_with_error(cc.fubini_study_form(SPHERE), cc.sphere_cycle(SPHERE))
    assert abs(res.value - 1) < 1e-8


def test_sphere_cycle_closed():
    assert cc.sphere_cycle(SPHERE).is_closed()


def test_embedded_sphere_volume_form():
    R3s = cc.real_space(3, box=1.5)
    vol = cc.integrate_cycle(cc.sphere_volume_form(R3s), cc.embedded_sphere_cycle(R3s))
    assert abs(vol - 1) < 1e-8


@pytest.mark.parametrize("radius", [0.3, 1.0, 2.0])
def test_disk_integral_against_closed_form(radius):
    # int_{|z|<R} omega_0 = R^2 / (1 + R^2)
    val = cc.integrate_cycle(cc.fubini_study_form(SPHERE), cc.disk_cycle(SPHERE, "N", radius))
    assert abs(val - radius**2 / (1 + radius**2)) < 1e-10


def test_stokes_on_disk():
    theta = cc.ChartForm(R2, 1, {"R": {(0,): -p * q**2, (1,): q * sp.cos(p)}})
    disk = cc.disk_cycle(R2, "R", 1.0)
    lhs = cc.integrate_cycle(cc.exterior_derivative(theta), disk)
    # boundary integral of theta over the unit circle, done by hand in polar form
    t = np.linspace(0, 2 * math.pi, 4001)[:-1]
    x, y = np.cos(t), np.sin(t)
    rhs = np.mean((-y * x**2) * (-np.sin(t)) + (x * np.cos(y)) * np.cos(t)) * 2 * math.pi
    assert abs(lhs - rhs) < 1e-10


def test_sample_points_deterministic():
    a = cc.sample_points([(-1, 1), (0, 2)], 16)
    b = cc.sample_points([(-1, 1), (0, 2)], 16)
    assert np.array_equal(a, b)
