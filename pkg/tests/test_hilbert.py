import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geoquant import hilbert as hs
from geoquant.weylalg import PolyObservable

Q, P = PolyObservable.q(), PolyObservable.p()
H = (Q * Q + P * P) / 2


# Bargmann space and the oscillator


@given(st.floats(0.1, 5.0), st.integers(1, 40))
def test_oscillator_spectrum(hbar, N):
    space = hs.bargmann_space(N, hbar)
    ev = hs.spectrum(hs.quantize_harmonic_oscillator(space))
    assert np.max(np.abs(ev - hbar * (np.arange(N + 1) + 0.5))) <= 1e-12 * hbar * N


def test_oscillator_without_half_form():
    space = hs.bargmann_space(10, 1.0, half_form=False)
    ev = hs.spectrum(hs.quantize_harmonic_oscillator(space))
    assert np.array_equal(ev, np.arange(11.0))


def test_bargmann_gram_matches_quadrature():
    space = hs.bargmann_space(6, 0.7)
    G = hs.bargmann_gram_quadrature(6, 0.7)
    assert np.max(np.abs(G - space.gram) / np.abs(np.diag(space.gram))[:, None]) < 1e-10
    assert space.check_gram()["passed"]


def test_bargmann_quantize_affine_in_h():
    space = hs.bargmann_space(8)
    A = hs.bargmann_quantize(3 * H + 2, space)
    ev = hs.spectrum(A)
    assert np.allclose(ev, 3 * (np.arange(9) + 0.5) + 2, atol=1e-12)
    with pytest.raises(hs.HilbertError, match="holomorphic polarization"):
        hs.bargmann_quantize(Q, space)


def test_bargmann_dirac_pair_exact():
    rep = hs.dirac_q3_q4_matrix_check([(H, 3 * H + 2)], hs.bargmann_space(12))
    assert rep.passed and rep.q4_residual == 0
    assert rep.as_dict()["residual_kind"] == "matrix"


def test_cutoff_validation():
    with pytest.raises(hs.HilbertError):
        hs.bargmann_space(0)


def test_operator_json():
    A = hs.quantize_harmonic_oscillator(hs.bargmann_space(3))
    data = json.loads(hs.operator_to_json(A))
    assert data["eigenvalues"] == [0.5, 1.5, 2.5, 3.5]
    assert data["basis"]["labels"] == ["z^0", "z^1", "z^2", "z^3"]


def test_adjoint_respects_gram():
    space = hs.bargmann_space(4)
    rng = np.random.default_rng(1)
    M = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    A = hs.QuantumOperator(space, M)
    u, v = rng.normal(size=5), rng.normal(size=5) + 0.5j
    G = space.gram
    lhs = np.vdot(u, G @ (M @ v))
    rhs = np.vdot(hs.adjoint(A).matrix @ u, G @ v)
    assert abs(lhs - rhs) < 1e-10 * abs(lhs)


# sphere


@pytest.mark.parametrize("k", [0, 1, 2, 5])
def test_sphere_gram_closed_form(k):
    space = hs.sphere_space(k)
    G = hs.sphere_gram_quadrature(k)
    assert np.max(np.abs(G - space.gram)) < 1e-10
    assert space.dim == k + 1


@pytest.mark.parametrize("k", [0, 1, 3])
def test_sphere_norm_divergence(k):
    assert not hs.sphere_norm_divergence(k, k).diverges
    assert hs.sphere_norm_divergence(k, k + 1).diverges
    with pytest.raises(hs.DivergentNormError):
        hs.sphere_monomial_norm(k, k + 1)
    assert hs.sphere_monomial_norm(k, k) == pytest.approx(1 / (k + 1))


def test_sphere_norm_beta_function():
    assert hs.sphere_norm(4, 2) == pytest.approx(math.gamma(3) * math.gamma(3) / math.gamma(6))


# cylinder


@given(st.integers(-3, 3), st.floats(0.2, 3.0))
def test_integer_lambda_shifts_are_unitarily_equivalent(m, hbar):
    base = hs.spectrum(hs.cylinder_vertical_quantize_p(0.0, 6, hbar))
    moved = hs.spectrum(hs.cylinder_vertical_quantize_p(float(m), 6, hbar, hs.compensating_shift(m)))
    assert hs.spectra_coincide(base, moved, 1e-12 * hbar * 10)


@given(st.floats(0.05, 0.95))
def test_fractional_lambda_spectra_disjoint(lam):
    a = hs.spectrum(hs.cylinder_vertical_quantize_p(0.0, 6))
    b = hs.spectrum(hs.cylinder_vertical_quantize_p(lam, 6, 1.0, hs.compensating_shift(lam)))
    assert hs.spectra_disjoint(a, b)


def test_half_lambda_spectrum():
    ev = hs.spectrum(hs.cylinder_vertical_quantize_p(0.5, 2))
    assert np.allclose(ev, [-2.5, -1.5, -0.5, 0.5, 1.5])


def test_cohomological_modes():
    basis = hs.cohomological_basis_cylinder(3, hbar=0.5)
    assert len(basis) == 7
    for mode in basis.modes:
        assert not hs.p_exactness(mode, 0.5).exact
    off = hs.CohomologicalMode(1, 0.5 + 0.3, 0.1)
    rep = hs.p_exactness(off, 0.5)
    assert rep.exact and rep.value_at_bs_point == 0
    ps = np.linspace(0.6, 1.0, 9)
    assert np.all(np.isfinite(rep.primitive(ps)))


def test_cohomological_width_validation():
    with pytest.raises(hs.HilbertError, match="width"):
        hs.cohomological_basis_cylinder(2, 1.0, width=0.8)


def test_no_degree_zero_sections():
    res = hs.polarized_sections_cylinder(4)
    assert res.solutions == []
    assert "no solutions" in res.reason


# position grid


def test_grid_dirac_converges_fourth_order():
    pairs = [(Q, P), (Q * Q, P), (Q * P, Q * Q * P)]
    res = [hs.dirac_q3_q4_matrix_check(pairs, hs.position_grid_space(N, 8.0)) for N in (128, 256)]
    assert all(r.passed for r in res)
    ratio = res[0].q4_residual / res[1].q4_residual
    assert 12 < ratio < 20


def test_grid_operators_hermitian():
    space = hs.position_grid_space(64)
    A = hs.vertical_quantize_Rn(Q * Q * P + Q, space)
    assert hs.self_adjoint_residual(A) < 1e-12


def test_grid_rejects_quadratic_momentum():
    with pytest.raises(hs.HilbertError, match="not quantizable in the vertical polarization"):
        hs.vertical_quantize_Rn(P * P, hs.position_grid_space(32))


def test_grid_canonical_commutator():
    space = hs.position_grid_space(256, 8.0)
    X, Pm = hs.vertical_quantize_Rn(Q, space).matrix, hs.vertical_quantize_Rn(P, space).matrix
    psi = hs.smooth_test_states(space)[:, 0]
    # [q, p] = i hbar up to the stencil error on a smooth state
    err = np.linalg.norm((X @ Pm - Pm @ X) @ psi - 1j * psi) / np.linalg.norm(psi)
    assert err < 1e-3
