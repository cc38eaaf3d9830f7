import numpy as np
import pytest

from bandfwi.errors import InvalidModelError, ValidationError
from bandfwi.model import (
    Ball,
    VoxelGrid,
    labeled_partition,
    model_projection,
    perturbation_size,
    radial_partition,
    wavespeed_from_model,
)


@pytest.fixture(scope="module")
def grid():
    return VoxelGrid(n=20, half_side=1.5)


@pytest.fixture(scope="module")
def shells(grid):
    return radial_partition([0.4, 0.7], grid=grid)


def test_identity_model_gives_unit_field(shells):
    c = wavespeed_from_model([1.0, 1.0], shells)
    assert np.all(c.values == 1.0)


def test_single_shell_definition(grid):
    part = radial_partition([0.5], grid=grid)
    c = wavespeed_from_model([2.0], part)
    r = grid.radii()
    assert np.all(c.values[r < 0.5] == 2.0)
    assert np.all(c.values[r >= 0.5] == 1.0)


def test_nested_shells_match_bruteforce_lookup(shells, grid):
    b = np.array([2.0, 3.0])
    c = wavespeed_from_model(b, shells)
    r = grid.radii()
    expected = np.ones_like(r)
    expected[r < 0.4] = 2.0
    expected[(r >= 0.4) & (r < 0.7)] = 3.0
    assert np.array_equal(c.values, expected)


def test_boundary_layer_carries_label_zero(shells, grid):
    r = grid.radii()
    assert np.all(shells.labels[r >= 1.0 - shells.epsilon] == 0)


def test_every_voxel_single_label(shells):
    assert shells.labels.min() >= 0 and shells.labels.max() <= shells.n_regions


def test_radial_labels_depend_only_on_radius(shells, grid):
    r = grid.radii().ravel()
    lab = shells.labels.ravel()
    order = np.argsort(r)
    # labels must be constant on equal radii
    rs, ls = r[order], lab[order]
    same = np.isclose(np.diff(rs), 0.0)
    assert np.all(ls[1:][same] == ls[:-1][same])


def test_projection_zero_and_volumes(shells, grid):
    zeros = model_projection(np.zeros((grid.n,) * 3), shells)
    assert np.array_equal(zeros, np.zeros(2))
    vols = model_projection(np.ones((grid.n,) * 3), shells)
    assert np.allclose(vols, shells.region_volumes())


def test_projection_adjoint_identity(shells, grid, rng):
    g = rng.standard_normal((grid.n,) * 3)
    h = rng.standard_normal(2)
    lhs = model_projection(g, shells) @ h
    indicator = wavespeed_from_model(h + 2.0, shells).values - 1.0  # h_j + 1 on D_j
    field = np.where(shells.labels > 0, indicator - 1.0, 0.0)
    rhs = np.sum(g * field) * grid.volume_element
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_composition_is_diagonal_volume_scaling(shells):
    b = np.array([1.7, 0.6])
    field = wavespeed_from_model(b, shells).values.copy()
    field[shells.labels == 0] = 0.0
    proj = model_projection(field, shells)
    assert np.allclose(proj, shells.region_volumes() * b, rtol=1e-14)


def test_convex_combination_linearity(shells, rng):
    b1 = rng.uniform(0.5, 2.0, 2)
    b2 = rng.uniform(0.5, 2.0, 2)
    a = 0.3
    mix = wavespeed_from_model(a * b1 + (1 - a) * b2, shells).values
    c1 = wavespeed_from_model(b1, shells).values
    c2 = wavespeed_from_model(b2, shells).values
    inside = shells.labels > 0
    assert np.allclose(mix[inside], (a * c1 + (1 - a) * c2)[inside])


def test_perturbation_size_examples():
    assert perturbation_size([1.2, 0.7], [1.2, 0.7]) == 0.0
    assert perturbation_size([2.0], [1.0]) == 3.0


def test_perturbation_size_matches_field_level(shells, rng):
    b1 = rng.uniform(0.5, 2.0, 2)
    b2 = rng.uniform(0.5, 2.0, 2)
    c1 = wavespeed_from_model(b1, shells).values
    c2 = wavespeed_from_model(b2, shells).values
    assert np.isclose(perturbation_size(b1, b2), np.max(np.abs(c1**2 - c2**2)))


def test_perturbation_size_gauge(rng):
    b = rng.uniform(0.5, 2.0, 3)
    assert perturbation_size(b, b) == 0.0
    b2 = b.copy()
    b2[1] += 1e-9
    assert perturbation_size(b, b2) > 0.0


def test_invalid_models_rejected(shells):
    with pytest.raises(InvalidModelError):
        wavespeed_from_model([1.0, -0.5], shells)
    with pytest.raises(InvalidModelError):
        wavespeed_from_model([1.0], shells)
    with pytest.raises(InvalidModelError):
        perturbation_size([1.0], [1.0, 2.0])


def test_partition_validation(grid):
    with pytest.raises(ValidationError):
        radial_partition([0.7, 0.4], grid=grid)
    with pytest.raises(ValidationError):
        radial_partition([0.95], grid=grid)  # touches the boundary layer
    labels = np.zeros((grid.n,) * 3, dtype=int)
    labels[10, 10, 10] = 1  # fine: deep interior voxel
    part = labeled_partition(labels, grid=grid)
    assert part.n_regions == 1
    bad = np.zeros((grid.n,) * 3, dtype=int)
    bad[0, 0, 0] = 1  # corner voxel is outside the ball
    with pytest.raises(ValidationError):
        labeled_partition(bad, grid=grid)


def test_ball_projection():
    ball = Ball(center=np.array([1.0, 1.0]), radius=0.5, b_min=0.2)
    inside = ball.project(np.array([1.1, 0.9]))
    assert np.allclose(inside, [1.1, 0.9])
    outside = ball.project(np.array([3.0, 1.0]))
    assert np.isclose(np.linalg.norm(outside - ball.center), ball.radius)
    floored = ball.project(np.array([0.05, 1.0]))
    assert floored[0] >= ball.b_min
