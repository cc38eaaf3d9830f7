import numpy as np
import pytest

from bandfwi.errors import DeltaTooLargeError
from bandfwi.weights import (
    build_psi,
    potential_from_speeds,
    solve_u_ode,
    verify_weight_inequalities,
)


@pytest.fixture(scope="module")
def square_well():
    # V = 1 on [0, 1), E = 1, delta = 0.05
    p = build_psi([1.0], [1.0], E=1.0, delta=0.05)
    return solve_u_ode(p, h=0.1)


def test_square_well_pinned_values(square_well):
    # frozen from the defining formulas: B = w(1)(psi(1) + E/2), R0 = w^{-1}(2B)
    w1 = 1.0 - 2.0 ** (-0.05)
    b_ref = w1 * 1.5
    r0_ref = (1.0 - 2.0 * b_ref) ** (-20.0) - 1.0
    assert np.isclose(square_well.B, b_ref, rtol=1e-14)
    assert np.isclose(square_well.B, 0.0510955066127316, rtol=1e-12)
    assert np.isclose(square_well.R0, r0_ref, rtol=1e-14)
    assert np.isclose(square_well.R0, 7.636167069941084, rtol=1e-12)
    assert square_well.psi_cap == 1.0  # mu_V = 0 (only a downward jump), max V = 1


def test_psi_continuity(square_well):
    p = square_well
    # staircase value at R against the tail formula, and the tail at R0 against 0
    tail_at_R = p.B / p.w(np.asarray([p.R]))[0] - p.E / 2.0
    assert abs(tail_at_R - p.psi_cap) < 1e-12
    tail_at_R0 = p.B / p.w(np.asarray([p.R0]))[0] - p.E / 2.0
    assert abs(tail_at_R0) < 1e-12


def test_trivial_potential():
    p = build_psi([], [], E=1.0)
    assert p.B == 0.0 and p.R0 == 0.0 and p.psi_cap == 0.0
    p = solve_u_ode(p, h=0.1)
    r = np.linspace(0.0, 3.0, 64)
    assert np.all(p.u(r) == 0.0)
    assert verify_weight_inequalities(p).ok


def test_delta_too_large():
    with pytest.raises(DeltaTooLargeError):
        build_psi([1.0], [5.0], E=0.5, delta=0.5)


def test_constant_psi_tanh_closed_form():
    # psi is constant (= 1) on the staircase piece; compare the solved profile
    # against the exact tanh solution seeded at r = R.
    p = solve_u_ode(build_psi([2.0], [1.0], E=1.0, delta=0.02), h=0.1)
    m = np.sqrt(p.psi_cap)
    u_r = p.u(np.asarray([p.R]))[0]
    rr = np.linspace(0.0, p.R, 257)
    exact = m * np.tanh(np.arctanh(u_r / m) + m * (p.R - rr) / 0.1)
    assert np.max(np.abs(p.u(rr) - exact)) < 1e-6


def test_bounds_and_support(square_well):
    r = square_well.mesh()
    u = square_well.u(r)
    assert np.all(u >= 0.0)
    assert np.all(u <= square_well.u_bound + 1e-12)
    assert np.all(u[r > square_well.R0] == 0.0)


def test_riccati_comparison_function(square_well):
    # u <= v with v the constant-psi(R) solution from the same endpoint
    p = square_well
    m = p.u_bound
    rr = np.linspace(0.0, p.R0 - 1e-9, 400)
    v = m * np.tanh(m * (p.R0 - rr) / p.h)
    assert np.all(p.u(rr) <= v + 1e-10)


def test_h_sweep_uniform_bounds():
    sup = []
    for h in (0.1, 0.05, 0.025):
        p = solve_u_ode(build_psi([1.0], [1.0], E=1.0, delta=0.05), h=h)
        r = p.mesh()
        u = p.u(r)
        assert np.all(u <= p.u_bound + 1e-12)
        assert np.all(u[r > p.R0] == 0.0)
        sup.append(u.max())
    assert np.all(np.asarray(sup) <= 1.0 + 1e-12)


def test_inequalities_pass_on_square_well(square_well):
    rep = verify_weight_inequalities(square_well, tol=1e-8)
    assert rep.ok
    assert rep.u_bound_ok
    assert rep.max_cell_defect <= 1e-8


def test_negative_control_is_flagged(square_well):
    p = square_well

    def psi_lowered(r):
        r = np.asarray(r, dtype=float)
        out = p.psi(r)
        tail = (r > p.R) & (r <= p.R0)
        out[tail] *= 0.9
        return out

    rep = verify_weight_inequalities(p, tol=1e-8, psi_override=psi_lowered)
    assert not rep.ok
    assert rep.ode_violations  # the solved u no longer satisfies the Riccati ODE


def test_mu_takes_positive_jumps_only():
    # V steps 0.5 -> 1.5 at r=1 (up 1.0), ends at r=2 (down 1.5)
    p = build_psi([1.0, 2.0], [0.5, 1.5], E=1.0, delta=0.02)
    assert p.mu_jumps == ((1.0, 1.0),)
    assert np.isclose(p.psi_cap, 1.0 + 1.5)
    # psi staircase: 1.5 on [0,1], 2.5 on (1, 2]
    assert np.isclose(p.psi(np.asarray([0.5]))[0], 1.5)
    assert np.isclose(p.psi(np.asarray([1.5]))[0], 2.5)


def test_potential_from_speeds():
    breaks, vals = potential_from_speeds((0.5,), (2.0,), E=1.0)
    assert breaks == (0.5,)
    assert np.isclose(vals[0], 1.0 - 0.25)
