import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geoquant import cswzw as cs
from oracles import verlinde_by_fusion, wzw_single_mode

amps = st.floats(-0.4, 0.4)


def field(N, a, b, c):
    return cs.LatticeGroupField.from_function(lambda x, y: a * np.sin(x) + b * np.cos(y) + c * np.sin(x + 2 * y), N)


# Verlinde


@given(st.integers(0, 4), st.integers(1, 10))
def test_verlinde_matches_fusion_trace(g, k):
    res = cs.verlinde_su2_dim((g, k))
    assert res.rounded == verlinde_by_fusion(g, k)
    assert res.residual < 1e-9


@pytest.mark.parametrize("k", range(1, 12))
def test_genus_one_counts_labels(k):
    assert cs.verlinde_su2_dim((1, k)).rounded == k + 1


def test_verlinde_known_values():
    assert cs.verlinde_su2_dim((0, 4)).rounded == 1
    assert cs.verlinde_su2_dim((2, 1)).rounded == 4
    assert cs.verlinde_su2_dim((3, 5)).rounded == 784


def test_verlinde_input_validation():
    with pytest.raises(ValueError, match="genus"):
        cs.VerlindeInput(-1, 3)
    with pytest.raises(ValueError, match="level"):
        cs.VerlindeInput(2, 0)


def test_verlinde_table_shape():
    rows = cs.verlinde_table(range(3), range(1, 4))
    assert len(rows) == 9
    assert set(rows[0].as_dict()) == {"g", "k", "value", "rounded", "residual"}


# lattice fields


def test_unit_modulus_enforced():
    v = np.ones((8, 8), dtype=complex)
    v[3, 5] = 1.01
    with pytest.raises(cs.LatticeError, match=r"site \(3, 5\)"):
        cs.LatticeGroupField(v)


def test_large_jump_rejected():
    g = cs.LatticeGroupField.from_function(lambda x, y: 4 * np.sin(3 * x), 16)
    with pytest.raises(cs.BranchError, match="phase jump"):
        cs.check_branches(g)


def test_winding_rejected():
    g = cs.LatticeGroupField.from_function(lambda x, y: x, 32)
    with pytest.raises(cs.BranchError, match="winding number 1 along x"):
        cs.wzw_action_abelian(g)


def test_unwrapped_phase_round_trip():
    x, y = cs.lattice_points(32)
    phi = 0.7 * np.sin(x) * np.cos(y) + 4.0
    g = cs.LatticeGroupField.from_phase(phi)
    assert np.max(np.abs(cs.unwrapped_phase(g) - (phi - 2 * math.pi))) < 1e-12


def test_connection_validation():
    with pytest.raises(cs.LatticeError):
        cs.LatticeConnection(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(cs.LatticeError, match="non-finite"):
        cs.LatticeConnection(np.full((4, 4), np.inf), np.zeros((4, 4)))


# actions


def test_wzw_of_constant_is_zero():
    g = cs.LatticeGroupField(np.full((16, 16), np.exp(0.3j)))
    assert cs.wzw_action_abelian(g) == 0


def test_wzw_single_mode_convergence():
    A = 0.7
    errs = []
    for N in (32, 64, 128):
        g = cs.LatticeGroupField.from_function(lambda x, y: A * np.sin(x), N)
        errs.append(abs(cs.wzw_action_abelian(g) - wzw_single_mode(A)))
    assert errs[-1] < 1e-3
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


@given(amps, amps, amps)
def test_wzw_inverse_invariant(a, b, c):
    g = field(32, a, b, c)
    assert abs(cs.wzw_action_abelian(g) - cs.wzw_action_abelian(g.inverse())) < 1e-12


def test_effective_action_trivial_field():
    N = 32
    ai, ao = cs.default_configuration(N)[:2]
    S = cs.effective_action_abelian(ao, ai, cs.LatticeGroupField.identity(N))
    a = 2 * math.pi / N
    assert abs(S - np.sum(ao * ai) * a * a / (2 * math.pi)) < 1e-12


def test_effective_action_zero_connection():
    g = field(32, 0.3, -0.2, 0.1)
    z = np.zeros((32, 32))
    assert abs(cs.effective_action_abelian(z, z, g) - cs.wzw_action_abelian(g)) < 1e-14


@given(amps, amps)
def test_effective_action_linear_in_one_component(s, t):
    N = 32
    g = field(N, 0.3, -0.2, 0.1)
    _, ao = cs.default_configuration(N)[:2]
    z = np.zeros((N, N))
    w = cs.wzw_action_abelian(g)
    lhs = cs.effective_action_abelian(s * ao, z, g) - w
    rhs = s * (cs.effective_action_abelian(ao, z, g) - w)
    assert abs(lhs - rhs) < 1e-12
    lhs = cs.effective_action_abelian(z, t * ao, g) - w
    rhs = t * (cs.effective_action_abelian(z, ao, g) - w)
    assert abs(lhs - rhs) < 1e-12


def test_effective_action_accepts_connection():
    N = 16
    ai, ao = cs.default_configuration(N)[:2]
    conn = cs.LatticeConnection(ao, ai)
    g = field(N, 0.2, 0.1, 0.0)
    assert cs.effective_action_abelian(conn, conn, g) == cs.effective_action_abelian(ao, ai, g)


def test_effective_action_lattice_mismatch():
    with pytest.raises(cs.LatticeError, match="different lattices"):
        cs.effective_action_abelian(np.zeros((8, 8)), np.zeros((8, 8)), cs.LatticeGroupField.identity(16))


# the gauge identity


def test_identity_gauge_gives_zero():
    ai, ao, g, _, _ = cs.default_configuration(32)
    one = cs.LatticeGroupField.identity(32)
    assert cs.pw_identity_residual(ai, ao, g, one, one).residual == 0


def test_pw_second_order_convergence():
    study = cs.pw_convergence()
    assert 1.8 <= study.slope <= 2.2
    assert study.rows[1].residual < 1e-3


@given(amps, amps, amps, amps)
def test_pw_exact_with_lattice_rule(a, b, c, d):
    N = 32
    ai, ao, _, _, _ = cs.default_configuration(N)
    g = field(N, a, b, 0.1)
    h_in = field(N, c, 0.2, 0.0)
    h_out = field(N, 0.1, d, -0.2)
    res = cs.pw_identity_residual(ai, ao, g, h_in, h_out, rule="lattice")
    assert res.residual < 1e-12


def test_pw_collapse_case():
    # h_in = g sends the field to h_out, gauge parts alone
    ai, ao, g, _, h_out = cs.default_configuration(64)
    res = cs.pw_identity_residual(ai, ao, g, g, h_out, rule="lattice")
    assert res.residual < 1e-12


def test_unknown_rule():
    ai, ao, g, h_in, h_out = cs.default_configuration(16)
    with pytest.raises(ValueError, match="rule"):
        cs.pw_identity_residual(ai, ao, g, h_in, h_out, rule="magic")
