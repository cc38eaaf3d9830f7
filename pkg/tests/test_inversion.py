import numpy as np
import pytest

from bandfwi.errors import InvalidModelError, ScaleTooLargeError
from bandfwi.inversion import (
    ConstantsEstimate,
    GridForwardMap,
    RadialForwardMap,
    StepSizeError,
    estimate_constants,
    frechet_apply,
    gradient,
    landweber_run,
    remainder_probe,
    sample_ball,
)
from bandfwi.model import Ball, VoxelGrid, radial_partition
from bandfwi.timedomain import FrequencyGrid


@pytest.fixture(scope="module")
def fwd():
    return RadialForwardMap((0.5,), FrequencyGrid(2.0, 24), lmax=6)


@pytest.fixture(scope="module")
def fwd2():
    return RadialForwardMap((0.35, 0.7), FrequencyGrid(2.0, 24), lmax=6)


@pytest.fixture(scope="module")
def grid_fwd():
    vgrid = VoxelGrid(n=28, half_side=1.5)
    part = radial_partition([0.5], grid=vgrid)
    return GridForwardMap(part, FrequencyGrid(1.5, 2), lmax=1, solver_tol=1e-11)


# ---------------------------------------------------------------------------
# Frechet derivative
# ---------------------------------------------------------------------------


def test_frechet_zero_direction(fwd2):
    block = frechet_apply(fwd2, [1.2, 1.1], [0.0, 0.0], 2.0)
    assert np.all(block.matrix == 0.0)


def test_frechet_linearity(fwd2, rng):
    b = np.array([1.2, 1.1])
    h1, h2 = rng.standard_normal(2), rng.standard_normal(2)
    a1, a2 = 0.7, -1.3
    mixed = frechet_apply(fwd2, b, a1 * h1 + a2 * h2, 2.0).matrix
    split = a1 * frechet_apply(fwd2, b, h1, 2.0).matrix + a2 * frechet_apply(
        fwd2, b, h2, 2.0
    ).matrix
    assert np.max(np.abs(mixed - split)) < 1e-10 * np.max(np.abs(mixed))


def test_frechet_matches_central_differences_with_slope_two(fwd2):
    # Richardson: the central-difference error of the data operator falls
    # like s^2 against the analytic derivative block
    from bandfwi.boundary import radial_data_blocks
    from bandfwi.helmholtz import RadialLayers

    b = np.array([1.2, 1.1])
    h = np.array([0.6, -0.4])
    lam = 2.0
    dblock = fwd2.frechet_blocks(b, h, lam)
    scales = np.array([1e-2, 5e-3, 2.5e-3])
    errs = []
    for s in scales:
        plus = radial_data_blocks(lam, RadialLayers((0.35, 0.7), tuple(b + s * h)), 6)
        minus = radial_data_blocks(lam, RadialLayers((0.35, 0.7), tuple(b - s * h)), 6)
        fd = (plus - minus) / (2 * s)
        errs.append(np.linalg.norm(fd - dblock))
    slope = np.polyfit(np.log(scales), np.log(errs), 1)[0]
    assert abs(slope - 2.0) < 0.1


def test_grid_frechet_matches_central_differences(grid_fwd):
    b = np.array([1.4])
    h = np.array([1.0])
    lam = 1.5
    analytic = grid_fwd.frechet_matrix(b, h, lam)
    s = 1e-4
    fd = (grid_fwd.data_matrix(b + s * h, lam) - grid_fwd.data_matrix(b - s * h, lam)) / (
        2 * s
    )
    assert np.max(np.abs(fd - analytic)) < 1e-5 * np.max(np.abs(analytic))


# ---------------------------------------------------------------------------
# adjoint exactness and gradient routes
# ---------------------------------------------------------------------------


def test_adjoint_identity_random_pairs(fwd2, rng):
    b = np.array([1.2, 1.1])
    jac = fwd2.jacobian(b)
    for _ in range(10):
        h = rng.standard_normal(2)
        y = rng.standard_normal(jac.shape[0]) + 1j * rng.standard_normal(jac.shape[0])
        lhs = np.real(np.vdot(y, jac @ h))
        rhs = float(np.real(jac.conj().T @ y) @ h)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1e-30)


def test_gradient_routes_agree_radial(fwd2):
    b = np.array([1.2, 1.1])
    ref = fwd2.data(np.array([1.3, 1.05]))
    g_mat = gradient(fwd2, b, ref, route="matrix")
    g_adj = gradient(fwd2, b, ref, route="adjoint")
    assert np.max(np.abs(g_mat - g_adj)) <= 1e-8 * max(np.max(np.abs(g_mat)), 1e-30)


def test_gradient_routes_agree_grid(grid_fwd):
    b = np.array([1.4])
    ref = grid_fwd.data(np.array([1.3]))
    g_mat = grid_fwd.gradient(b, ref)
    g_adj = grid_fwd.gradient_adjoint_state(b, ref)
    assert np.max(np.abs(g_mat - g_adj)) <= 1e-8 * np.max(np.abs(g_mat))


def test_gradient_matches_half_misfit_differences(fwd):
    b = np.array([1.35])
    ref = fwd.data(np.array([1.2]))
    g = fwd.gradient(b, ref)
    s = 1e-3
    fd = (fwd.misfit(b + s, ref) - fwd.misfit(b - s, ref)) / (4 * s)
    assert abs(fd - g[0]) <= 1e-5 * abs(fd)


def test_gradient_fd_second_order_convergence(fwd2):
    b = np.array([1.2, 1.1])
    ref = fwd2.data(np.array([1.23, 1.08]))
    g = fwd2.gradient(b, ref)
    errs = []
    scales = (1e-3, 5e-4, 2.5e-4)
    for s in scales:
        fd = np.array(
            [
                (fwd2.misfit(b + s * e, ref) - fwd2.misfit(b - s * e, ref)) / (4 * s)
                for e in np.eye(2)
            ]
        )
        errs.append(np.linalg.norm(fd - g))
    slope = np.polyfit(np.log(scales), np.log(errs), 1)[0]
    assert abs(slope - 2.0) < 0.15


def test_zero_residual_zero_gradient(fwd):
    b = np.array([1.25])
    assert np.all(fwd.gradient(b, fwd.data(b)) == 0.0)


# ---------------------------------------------------------------------------
# remainder probe
# ---------------------------------------------------------------------------


def test_remainder_slope_two(fwd2):
    out = remainder_probe(fwd2, np.array([1.25, 1.1]), np.array([1.0, -0.5]), [1e-2, 5e-3, 2.5e-3])
    assert 1.9 <= out["slope"] <= 2.1


def test_remainder_residual_decays(fwd):
    out = remainder_probe(fwd, np.array([1.2]), np.array([1.0]), [4e-2, 1e-2, 2.5e-3])
    assert out["residuals"][-1] < out["residuals"][0]


def test_remainder_precondition(fwd):
    with pytest.raises(ScaleTooLargeError):
        remainder_probe(fwd, np.array([1.2]), np.array([1.0]), [0.5], a_c=50.0)


# ---------------------------------------------------------------------------
# constants and the Landweber loop
# ---------------------------------------------------------------------------


def test_constants_arithmetic_instance():
    c = ConstantsEstimate(l_hat=2.0, l_lip=1.0, c_f=1.0, lambda0=1.0)
    assert np.isclose(c.mu_max, 0.125)  # min(1/8, 4)
    assert 0.0 < c.rho(c.auto_mu()) < 1.0
    assert np.isclose(c.r_ball, 1.0 / (2.0 * np.sqrt(2.0)))


def test_constants_estimation_sane(fwd):
    ball = Ball(center=np.array([1.25]), radius=0.2)
    c = estimate_constants(fwd, ball, samples=5, seed=0)
    assert c.l_hat > 0 and c.l_lip > 0 and c.c_f > 0
    assert not c.degenerate
    assert c.mu_max == min(1.0 / (2 * c.l_hat**2), 4 * c.c_f**2)


def test_degenerate_ball_flagged(fwd):
    ball = Ball(center=np.array([1.25]), radius=0.0)
    c = estimate_constants(fwd, ball, samples=3, seed=0)
    assert c.degenerate
    assert c.l_lip == 0.0


def test_sample_ball_respects_constraints(rng):
    ball = Ball(center=np.array([1.0, 1.0, 1.0]), radius=0.4, b_min=0.8)
    pts = sample_ball(ball, 64, rng)
    assert np.all(pts >= 0.8)
    assert np.all(np.linalg.norm(pts - ball.center, axis=1) <= 0.4 + 1e-12)


def test_landweber_fixed_point(fwd):
    ball = Ball(center=np.array([1.25]), radius=0.2)
    states = landweber_run(fwd, np.array([1.2]), np.array([1.2]), ball, mu=1.0, n_iter=3)
    for st in states:
        assert np.allclose(st.x, [1.2])
        assert st.misfit == 0.0
        assert st.gradient_norm == 0.0


def test_landweber_converges_small(fwd):
    ball = Ball(center=np.array([1.275]), radius=0.25)
    states = landweber_run(fwd, np.array([1.35]), np.array([1.2]), ball, mu="auto", n_iter=40, seed=2)
    errs = np.array([s.error for s in states])
    mis = np.array([s.misfit for s in states])
    assert errs[-1] < 1e-5
    assert np.all(np.diff(mis) <= 1e-18)
    assert np.all(np.diff(errs) <= 1e-14)


def test_landweber_divergence_detection(fwd):
    ball = Ball(center=np.array([1.275]), radius=0.25)
    consts = estimate_constants(fwd, ball, samples=4, seed=0)
    with pytest.raises(StepSizeError):
        landweber_run(
            fwd,
            np.array([1.35]),
            np.array([1.2]),
            ball,
            mu=300.0 / consts.l_hat**2,
            n_iter=60,
        )


def test_landweber_requires_ball_membership(fwd):
    ball = Ball(center=np.array([1.25]), radius=0.01)
    with pytest.raises(InvalidModelError):
        landweber_run(fwd, np.array([1.5]), np.array([1.2]), ball, mu=0.1, n_iter=2)


def test_landweber_projection_keeps_iterates_feasible(fwd):
    # a large step is clamped back onto the ball rather than escaping
    ball = Ball(center=np.array([1.275]), radius=0.08)
    try:
        states = landweber_run(
            fwd, np.array([1.35]), np.array([1.21]), ball, mu=2000.0, n_iter=4
        )
    except StepSizeError:
        return
    for st in states:
        assert ball.contains(st.x, tol=1e-9)
