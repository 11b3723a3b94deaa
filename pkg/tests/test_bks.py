import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geoquant import bks
from oracles import gaussian_chirp, gaussian_second_derivative


def packet(c=0.0, k=0.0, hbar=1.0, s=1.0):
    return lambda q: np.exp(-(q - c) ** 2 / (2 * s * s * hbar)) * np.exp(1j * k * q)


packets = st.tuples(st.floats(-2.0, 2.0), st.floats(-1.5, 1.5), st.floats(0.6, 1.5))


# grid states


def test_grid_state_validation():
    with pytest.raises(bks.BKSError, match="even"):
        bks.GridState(np.ones(7), 1.0)
    with pytest.raises(bks.BKSError, match="non-finite"):
        bks.GridState(np.array([1, 2, np.nan, 4]), 1.0)
    with pytest.raises(bks.BKSError, match="label"):
        bks.GridState(np.ones(8), 1.0, label="spin")


def test_half_form_labels():
    psi = bks.position_state(packet())
    assert psi.half_form == "sqrt_dq"
    assert bks.bks_fourier_map(psi).half_form == "sqrt_dp"


def test_mixed_grids_rejected():
    a = bks.position_state(packet(), 64)
    b = bks.position_state(packet(), 128)
    with pytest.raises(bks.BKSError, match="different grids"):
        a + b


# the Fourier pairing


@given(packets)
def test_unitarity(args):
    c, k, s = args
    psi = bks.position_state(packet(c, k, 1.0, s))
    phi = bks.bks_fourier_map(psi)
    assert abs(phi.norm() - psi.norm()) < 1e-12 * psi.norm()
    back = bks.bks_inverse_map(phi)
    assert np.max(np.abs(back.values - psi.values)) < 1e-12


@given(packets, st.integers(-20, 20))
def test_translation_becomes_phase(args, m):
    c, k, s = args
    psi = bks.position_state(packet(c, k, 1.0, s))
    shifted = psi.with_values(np.roll(psi.values, m))
    a = m * psi.spacing
    phi, phi_s = bks.bks_fourier_map(psi), bks.bks_fourier_map(shifted)
    assert np.max(np.abs(phi_s.values - np.exp(1j * phi.points * a) * phi.values)) < 1e-12


def test_linearity():
    a = bks.position_state(packet(0.5, 0.2))
    b = bks.position_state(packet(-1.0, -0.7))
    lhs = bks.bks_fourier_map(a * (2 - 1j) + b).values
    rhs = (2 - 1j) * bks.bks_fourier_map(a).values + bks.bks_fourier_map(b).values
    assert np.max(np.abs(lhs - rhs)) < 1e-13


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
def test_gaussian_maps_to_gaussian(hbar):
    psi = bks.position_state(packet(hbar=hbar), 256, hbar=hbar)
    phi = bks.bks_fourier_map(psi)
    expected = np.exp(-phi.points**2 / (2 * hbar))
    assert np.max(np.abs(phi.values - expected)) < 1e-12


def test_fourier_matrix_matches_fft():
    psi = bks.position_state(packet(0.3, 0.4), 64, 8.0)
    U = bks.fourier_matrix(64, 8.0)
    assert np.max(np.abs(U @ psi.values - bks.bks_fourier_map(psi).values)) < 1e-12


def test_label_errors():
    psi = bks.position_state(packet())
    with pytest.raises(bks.BKSError):
        bks.bks_inverse_map(psi)
    with pytest.raises(bks.BKSError):
        bks.bks_fourier_map(bks.bks_fourier_map(psi))


def test_wide_state_warns():
    psi = bks.position_state(packet(s=4.0), 128, 6.0)
    with pytest.warns(RuntimeWarning, match="not band-limited"):
        phi = bks.bks_fourier_map(psi)
    assert phi.warnings


def test_narrow_state_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        phi = bks.bks_fourier_map(bks.position_state(packet()))
    assert phi.warnings == ()


# p^2 through the pairing


def test_p2_matches_second_derivative():
    psi = bks.position_state(packet())
    out = bks.quantize_p2_via_pairing(psi)
    exact = -gaussian_second_derivative(psi.points)
    assert np.max(np.abs(out.values - exact)) < 1e-6


def test_p2_of_constant_is_zero():
    psi = bks.position_state(lambda q: np.full(q.shape, 0.3 + 0.1j), 64, 5.0)
    out = bks.quantize_p2_via_pairing(psi, tail_tol=np.inf)
    assert np.max(np.abs(out.values)) < 1e-12


def test_pairing_matrix_hermitian():
    M = bks.p2_pairing_matrix(64)
    assert np.max(np.abs(M - M.conj().T)) < 1e-10


def test_stencil_lags_spectral_derivative():
    psi = bks.position_state(packet(), 128)
    D2 = bks.periodic_second_derivative(128, psi.spacing)
    exact = gaussian_second_derivative(psi.points)
    stencil_err = np.max(np.abs(D2 @ psi.values - exact))
    spectral_err = np.max(np.abs(bks.spectral_derivative(psi, 2).values - exact))
    assert spectral_err < 1e-10 < stencil_err


def test_p2_hbar_mismatch():
    with pytest.raises(bks.BKSError, match="hbar"):
        bks.quantize_p2_via_pairing(bks.position_state(packet()), hbar=2.0)


@pytest.mark.parametrize("hbar", [0.5, 1.0])
def test_commutator_with_position(hbar):
    rep = bks.p2_commutator_check(256, hbar=hbar)
    assert rep.passed


# stationary phase


@pytest.mark.parametrize("qv,t", [(0.0, 0.1), (0.7, 0.02), (-1.3, 0.5)])
def test_chirp_integral_closed_form(qv, t):
    got = bks.chirp_integral(packet(), qv, t).value
    assert abs(got - gaussian_chirp(qv, t)) < 1e-10


def test_chirp_rejects_bad_t():
    with pytest.raises(bks.StationaryPhaseError, match="positive"):
        bks.chirp_integral(packet(), 0.0, 0.0)
    with pytest.raises(bks.StationaryPhaseError, match="window"):
        bks.chirp_integral(packet(), 0.0, 100.0, extent=5.0)


def test_two_term_error_ratios():
    rows = bks.stationary_phase_check(packet(), gaussian_second_derivative, [1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3])
    ratios = bks.error_ratios(rows)
    assert all(abs(r - 0.25) < 0.01 for r in ratios)


def test_asymptote_phase_small_t():
    t = 1e-4
    I = bks.chirp_integral(packet(), 0.0, t).value
    assert abs(cmath.phase(I) - math.pi / 4) < 1e-3


def test_richardson_weights_quadratic():
    w = bks.richardson_weights()
    r = np.array([1.0, 0.5, 0.25])
    for coeffs in ([1.0, 0.0, 0.0], [0.3, -2.0, 0.7], [0.0, 1.5, -4.0]):
        F = coeffs[0] + coeffs[1] * r + coeffs[2] * r**2
        assert abs(w @ F - coeffs[1]) < 1e-12


def test_stationary_phase_quantization():
    psi = bks.position_state(packet())
    res = bks.quantize_p2_stationary_phase(psi, second_derivative=gaussian_second_derivative)
    assert res.magnitude_error < 1e-3
    assert res.phase_error < 1e-3
    assert abs(res.phase_offset - math.pi / 4) < 1e-3
    # the t -> 0 limit of the pairing gives back e^{i pi/4} psi
    assert np.max(np.abs(res.limit - np.exp(1j * math.pi / 4) * psi.values[np.searchsorted(psi.points, res.probes)])) < 1e-6


def test_methods_agree():
    psi = bks.position_state(packet(0.2, 0.3))
    sp_res = bks.quantize_p2_stationary_phase(psi)
    pairing = bks.quantize_p2_via_pairing(psi)
    idx = np.searchsorted(psi.points, sp_res.probes)
    assert np.max(np.abs(sp_res.normalized - pairing.values[idx] / 2)) < 1e-3


def test_probes_snap_to_grid():
    psi = bks.position_state(packet(), 256)
    res = bks.quantize_p2_stationary_phase(psi, probes=(0.01,))
    assert res.probes[0] in psi.points
