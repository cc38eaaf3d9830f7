import numpy as np
from scipy.special import spherical_jn, spherical_yn

from bandfwi.special import (
    spherical_h1_all,
    spherical_jn_all,
    spherical_jn_d,
    spherical_yn_all,
    spherical_yn_d,
)


def test_jn_matches_scipy(rng):
    z = np.concatenate([rng.uniform(1e-8, 0.5, 20), rng.uniform(0.5, 40.0, 40)])
    mine = spherical_jn_all(12, z)
    ref = np.array([spherical_jn(l, z) for l in range(13)])
    assert np.max(np.abs(mine - ref) / (np.abs(ref) + 1e-250)) < 1e-11


def test_yn_matches_scipy(rng):
    z = rng.uniform(0.05, 40.0, 50)
    mine = spherical_yn_all(12, z)
    ref = np.array([spherical_yn(l, z) for l in range(13)])
    assert np.max(np.abs(mine - ref) / np.abs(ref)) < 1e-12


def test_derivatives_match_scipy(rng):
    z = rng.uniform(0.2, 20.0, 30)
    _, jd = spherical_jn_d(10, z)
    _, yd = spherical_yn_d(10, z)
    ref_j = np.array([spherical_jn(l, z, derivative=True) for l in range(11)])
    ref_y = np.array([spherical_yn(l, z, derivative=True) for l in range(11)])
    assert np.max(np.abs(jd - ref_j) / (np.abs(ref_j) + 1e-250)) < 1e-10
    assert np.max(np.abs(yd - ref_y) / np.abs(ref_y)) < 1e-10


def test_hankel_wronskian(rng):
    # j_l(z) h_l'(z) - j_l'(z) h_l(z) = i / z^2
    z = rng.uniform(0.5, 15.0, 20)
    lmax = 8
    j, jd = spherical_jn_d(lmax, z)
    h = spherical_h1_all(lmax, z)
    hd = j * 0j
    hd[0] = -h[1]
    for ell in range(1, lmax + 1):
        hd[ell] = h[ell - 1] - (ell + 1) / z * h[ell]
    wron = j * hd - jd * h
    assert np.max(np.abs(wron - 1j / z**2)) < 1e-12


def test_scalar_input_shape():
    out = spherical_jn_all(3, 2.5)
    assert out.shape == (4,)
    assert np.isclose(out[2], spherical_jn(2, 2.5))
