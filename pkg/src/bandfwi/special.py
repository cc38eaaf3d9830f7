"""Spherical Bessel and Hankel functions for the radial solver.

j_l is computed by downward recurrence (stable for l > |z|), y_l by upward
recurrence (stable in that direction), with explicit l=0,1 seeds.  Outgoing
and incoming Hankel functions are the combinations j + iy and j - iy.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "spherical_jn_all",
    "spherical_yn_all",
    "spherical_h1_all",
    "spherical_h2_all",
    "spherical_jn_d",
    "spherical_yn_d",
]


def _as_array(z):
    z = np.asarray(z, dtype=float)
    return z, z.ndim == 0


def spherical_jn_all(lmax: int, z) -> np.ndarray:
    """All j_l(z) for l = 0..lmax, shape (lmax+1,) + z.shape.

    Downward recurrence from a start order well above lmax, normalized
    against the closed form j_0 = sin(z)/z.  Near z = 0 the series
    j_l ~ z^l / (2l+1)!! is used.
    """
    z, scalar = _as_array(z)
    zflat = np.atleast_1d(z)
    small = np.abs(zflat) < 1e-6
    zs = np.where(small, 1.0, zflat)

    # Start above both lmax and max(z) so the downward pass is in the
    # exponentially decaying regime everywhere.
    nstart = lmax + int(np.ceil(1.3 * float(np.max(np.abs(zs))))) + 25
    jp = np.zeros_like(zs)
    jc = np.full_like(zs, 1e-30)
    vals = np.zeros((lmax + 1,) + zs.shape)
    for n in range(nstart, -1, -1):
        jm = (2 * n + 3) / zs * jc - jp
        jp, jc = jc, jm
        big = np.abs(jc) > 1e250
        if np.any(big):
            jc = np.where(big, jc * 1e-250, jc)
            jp = np.where(big, jp * 1e-250, jp)
            vals[:, big] *= 1e-250
        if n <= lmax:
            vals[n] = jc
    j0 = np.sin(zs) / zs
    out = vals * (j0 / np.where(vals[0] == 0.0, 1.0, vals[0]))

    if np.any(small):
        # z^l / (2l+1)!! with one correction term.
        dfact = 1.0
        t = np.where(small, zflat, 0.0)
        for ell in range(lmax + 1):
            if ell > 0:
                dfact *= 2 * ell + 1
            series = t**ell / dfact * (1.0 - t**2 / (2.0 * (2 * ell + 3)))
            out[ell] = np.where(small, series, out[ell])
    return out.reshape((lmax + 1,) + z.shape)


def spherical_yn_all(lmax: int, z) -> np.ndarray:
    """All y_l(z) for l = 0..lmax by upward recurrence from y_0, y_1."""
    z, scalar = _as_array(z)
    if np.any(z <= 0):
        raise ValueError("y_l requires z > 0")
    out = np.zeros((lmax + 1,) + z.shape)
    out[0] = -np.cos(z) / z
    if lmax >= 1:
        out[1] = -np.cos(z) / z**2 - np.sin(z) / z
    for ell in range(2, lmax + 1):
        out[ell] = (2 * ell - 1) / z * out[ell - 1] - out[ell - 2]
    return out[:, ()] if scalar else out


def spherical_h1_all(lmax: int, z) -> np.ndarray:
    """Outgoing h^(1)_l = j_l + i y_l."""
    return spherical_jn_all(lmax, z) + 1j * spherical_yn_all(lmax, z)


def spherical_h2_all(lmax: int, z) -> np.ndarray:
    """Incoming h^(2)_l = j_l - i y_l."""
    return spherical_jn_all(lmax, z) - 1j * spherical_yn_all(lmax, z)


def _derivative_from_table(table: np.ndarray, z) -> np.ndarray:
    # f_l' = f_{l-1} - (l+1)/z f_l, and f_0' = -f_1 for j, y, h.
    z = np.asarray(z, dtype=float)
    lmax = table.shape[0] - 1
    out = np.zeros_like(table)
    out[0] = -table[1] if lmax >= 1 else -spherical_jn_all(1, z)[1]
    for ell in range(1, lmax + 1):
        out[ell] = table[ell - 1] - (ell + 1) / z * table[ell]
    return out


def spherical_jn_d(lmax: int, z) -> tuple[np.ndarray, np.ndarray]:
    """j_l(z) and j_l'(z) for l = 0..lmax."""
    tab = spherical_jn_all(max(lmax, 1), z)
    return tab[: lmax + 1], _derivative_from_table(tab, z)[: lmax + 1]


def spherical_yn_d(lmax: int, z) -> tuple[np.ndarray, np.ndarray]:
    """y_l(z) and y_l'(z) for l = 0..lmax."""
    tab = spherical_yn_all(max(lmax, 1), z)
    return tab[: lmax + 1], _derivative_from_table(tab, z)[: lmax + 1]
