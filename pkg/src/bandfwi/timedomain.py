"""Band-limited sources, time traces, and the Hilbert-Schmidt misfit.

Conventions: spectra live on [-lambda0, lambda0]; synthesis is
f(t) = (1/2pi) int e^{-i t lambda} fhat(lambda) dlambda.  The source space
carries the spectral inner product int <fhat, ghat>_{H^{-1/2}} dlambda, which
makes the shift basis a_l b_m with
ahat_l(lambda) = e^{-i l pi lambda / lambda0} / sqrt(2 lambda0) orthonormal.
With that normalization the windowed Hilbert-Schmidt misfit summed over the
full basis collapses to the closed form
(1/(4 pi lambda0)) int ||M_c - M_cdag||_HS^2 dlambda, because time shifts by
l pi / lambda0 tile the real line against the window of length pi / lambda0.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .boundary import (
    DataOperator,
    data_operator,
    free_single_layer_blocks,
    mode_table,
    multipliers,
    radial_data_blocks,
)
from .helmholtz import RadialLayers
from .model import Wavespeed

DEFAULT_TIME_NODES = 64


def default_node_count(lambda0: float) -> int:
    return 2 * int(np.ceil(8.0 * lambda0))


@dataclass(frozen=True)
class FrequencyGrid:
    """Gauss-Legendre quadrature on [-lambda0, lambda0]."""

    lambda0: float
    n_nodes: int = 0

    def __post_init__(self):
        if self.lambda0 < 1.0:
            warnings.warn("lambda0 < 1: the paper's band assumption is lambda0 >= 1")
        if self.n_nodes <= 0:
            object.__setattr__(self, "n_nodes", default_node_count(self.lambda0))
        nodes, weights = np.polynomial.legendre.leggauss(self.n_nodes)
        object.__setattr__(self, "nodes", self.lambda0 * nodes)
        object.__setattr__(self, "weights", self.lambda0 * weights)

    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def refined(self, factor: float) -> "FrequencyGrid":
        return FrequencyGrid(self.lambda0, int(np.ceil(self.n_nodes * factor)))


@dataclass(frozen=True)
class TimeWindow:
    """Characteristic-function window of half-width T = pi/(2 lambda0)."""

    lambda0: float
    t0: float = 0.0

    @property
    def half_width(self) -> float:
        return np.pi / (2.0 * self.lambda0)

    @property
    def length(self) -> float:
        return np.pi / self.lambda0

    def weight(self, t) -> np.ndarray:
        return (np.abs(np.asarray(t, dtype=float) - self.t0) <= self.half_width).astype(float)

    def quadrature(self, n: int = DEFAULT_TIME_NODES) -> tuple[np.ndarray, np.ndarray]:
        tq, wq = np.polynomial.legendre.leggauss(n)
        return self.t0 + self.half_width * tq, self.half_width * wq


@dataclass(frozen=True)
class BandSource:
    """Coefficients against the orthonormal shift basis {a_l b_m}.

    ``coeffs`` has shape (n_shifts, n_modes) over ``shifts`` (integer l) and
    boundary modes in (l, m) order.  Parseval: the squared source norm is the
    plain sum of squared coefficient magnitudes.
    """

    lambda0: float
    shifts: tuple[int, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 2 or c.shape[0] != len(self.shifts):
            raise ValueError("coeffs must have shape (n_shifts, n_modes)")

    @property
    def n_modes(self) -> int:
        return np.asarray(self.coeffs).shape[1]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def spectrum(self, lams: np.ndarray) -> np.ndarray:
        """fhat at the given frequencies, shape (n_lams, n_modes)."""
        lams = np.asarray(lams, dtype=float)
        inband = (np.abs(lams) <= self.lambda0).astype(float)
        mod = np.exp(
            -1j * np.pi / self.lambda0 * np.outer(lams, np.asarray(self.shifts))
        ) * inband[:, None]
        return (mod / np.sqrt(2.0 * self.lambda0)) @ np.asarray(self.coeffs, dtype=complex)

    def time_values(self, times: np.ndarray) -> np.ndarray:
        """f(t) in boundary-mode coordinates, shape (n_times, n_modes)."""
        times = np.asarray(times, dtype=float)
        tau = times[:, None] + np.pi / self.lambda0 * np.asarray(self.shifts)[None, :]
        center = np.abs(tau) < 1e-12
        safe = np.where(center, 1.0, tau)
        prof = np.where(
            center,
            self.lambda0 / (np.pi * np.sqrt(2.0 * self.lambda0)),
            np.sin(self.lambda0 * safe) / (np.pi * np.sqrt(2.0 * self.lambda0) * safe),
        )
        return prof @ np.asarray(self.coeffs, dtype=complex)


def unit_source(lambda0: float, lmax: int, shift: int = 0, mode: int = 0) -> BandSource:
    coeffs = np.zeros((1, (lmax + 1) ** 2), dtype=complex)
    coeffs[0, mode] = 1.0
    return BandSource(lambda0=lambda0, shifts=(shift,), coeffs=coeffs)


# ---------------------------------------------------------------------------
# Data assembly over a frequency grid.
# ---------------------------------------------------------------------------


def _is_radial(c) -> bool:
    return isinstance(c, RadialLayers)


def data_blocks_on_grid(c, grid: FrequencyGrid, lmax: int) -> np.ndarray:
    """Per-degree data values on the frequency nodes for a radial medium.

    Negative frequencies are filled by conjugation symmetry of the outgoing
    kernel, halving the radial solves on the symmetric grid.
    """
    lams = grid.nodes
    out = np.zeros((lams.size, lmax + 1), dtype=complex)
    done: dict[float, int] = {}
    for i, la in enumerate(lams):
        key = -la
        if key in done:
            out[i] = np.conj(out[done[key]])
        else:
            out[i] = radial_data_blocks(la, c, lmax)
            done[la] = i
    return out


def data_matrices_on_grid(c, grid: FrequencyGrid, lmax: int, **kwargs) -> list[DataOperator]:
    return [data_operator(la, c, lmax=lmax, **kwargs) for la in grid.nodes]


def _blocks_to_hs2(blocks: np.ndarray, lmax: int) -> np.ndarray:
    mult = 2 * np.arange(lmax + 1) + 1
    return (np.abs(blocks) ** 2 * mult[None, :]).sum(axis=1)


# ---------------------------------------------------------------------------
# Misfit functionals.
# ---------------------------------------------------------------------------


def hs_misfit_frequency(
    c,
    c_dag,
    grid: FrequencyGrid,
    lmax: int,
    **kwargs,
) -> float:
    """Closed-form misfit (1/(4 pi lambda0)) int ||M_c - M_cdag||_HS^2 dlambda."""
    if _is_radial(c) and _is_radial(c_dag):
        diff = data_blocks_on_grid(c, grid, lmax) - data_blocks_on_grid(c_dag, grid, lmax)
        hs2 = _blocks_to_hs2(diff, lmax)
    else:
        ms_a = data_matrices_on_grid(c, grid, lmax, **kwargs)
        ms_b = data_matrices_on_grid(c_dag, grid, lmax, **kwargs)
        hs2 = np.array(
            [np.linalg.norm(a.matrix - b.matrix) ** 2 for a, b in zip(ms_a, ms_b)]
        )
    return float(np.sum(grid.weights * hs2) / (4.0 * np.pi * grid.lambda0))


def shift_sampling_nodes(lambda0: float, l_shift: int, n_time: int = DEFAULT_TIME_NODES) -> int:
    """Frequency nodes needed so Gauss-Legendre resolves e^{-i t lambda} over
    all shifted windows |t| <= (l_shift + 1/2) pi / lambda0."""
    t_max = (l_shift + 0.5) * np.pi / lambda0
    return int(np.ceil(1.3 * lambda0 * t_max)) + 16


def hs_misfit_time(
    c,
    c_dag,
    window: TimeWindow,
    l_shift: int,
    lmax: int,
    grid: FrequencyGrid | None = None,
    n_time: int = DEFAULT_TIME_NODES,
    return_partial: bool = False,
    **kwargs,
):
    """Windowed Hilbert-Schmidt misfit truncated to shifts |l| <= l_shift.

    Sums int ||tau(U_c - U_cdag) a_l b_m||_{H^{1/2}}^2 w_T dt over the basis,
    with 64-point Gauss quadrature on the window.  Partial sums increase
    monotonically to the frequency-domain closed form as l_shift grows.
    """
    lambda0 = window.lambda0
    if grid is None or grid.n_nodes < shift_sampling_nodes(lambda0, l_shift, n_time):
        grid = FrequencyGrid(lambda0, max(
            default_node_count(lambda0), shift_sampling_nodes(lambda0, l_shift, n_time)
        ))
    lams, ws = grid.nodes, grid.weights
    if _is_radial(c) and _is_radial(c_dag):
        diff = data_blocks_on_grid(c, grid, lmax) - data_blocks_on_grid(c_dag, grid, lmax)
        mult = (2 * np.arange(lmax + 1) + 1).astype(float)
    else:
        ms_a = data_matrices_on_grid(c, grid, lmax, **kwargs)
        ms_b = data_matrices_on_grid(c_dag, grid, lmax, **kwargs)
        n_modes = (lmax + 1) ** 2
        diff = np.stack([(a.matrix - b.matrix).reshape(-1) for a, b in zip(ms_a, ms_b)])
        mult = np.ones(diff.shape[1])

    step = np.pi / lambda0
    tq, twq = window.quadrature(n_time)
    shifts = np.arange(-l_shift, l_shift + 1)
    tt = tq[None, :] + (shifts * step)[:, None]
    phase = np.exp(-1j * np.outer(tt.ravel(), lams))
    g = (phase @ (ws[:, None] * diff)) / (2.0 * np.pi * np.sqrt(2.0 * lambda0))
    energy = (np.abs(g) ** 2 * mult[None, :]).sum(axis=1).reshape(shifts.size, tq.size)
    per_shift = energy @ twq
    total = float(per_shift.sum())
    if return_partial:
        # cumulative over |l| <= k for k = 0..l_shift
        mid = l_shift
        partial = np.zeros(l_shift + 1)
        partial[0] = per_shift[mid]
        for k in range(1, l_shift + 1):
            partial[k] = partial[k - 1] + per_shift[mid - k] + per_shift[mid + k]
        return total, partial
    return total


# ---------------------------------------------------------------------------
# Time-trace synthesis.
# ---------------------------------------------------------------------------


@dataclass
class TraceSeries:
    """Boundary trace samples in H^{1/2} output coordinates."""

    times: np.ndarray
    coeffs: np.ndarray  # (n_times, n_modes)
    lmax: int

    def write_csv(self, path, header_comment: str | None = None):
        modes = mode_table(self.lmax)
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["t", "l", "m", "re", "im"])
            for i, t in enumerate(self.times):
                for k, (ell, m) in enumerate(modes):
                    v = self.coeffs[i, k]
                    w.writerow([f"{t:.17g}", ell, m, f"{v.real:.17g}", f"{v.imag:.17g}"])


def synthesize_trace(
    c,
    source: BandSource,
    times,
    lmax: int,
    grid: FrequencyGrid | None = None,
    include_free: bool = True,
    **kwargs,
) -> TraceSeries:
    """Boundary trace of U_c f (or of (U_c - U_1) f with include_free=False).

    Evaluates (1/2pi) int e^{-i t lambda} [M_c(lambda) + S^+(lambda)]
    fhat(lambda) dlambda on the frequency-grid quadrature.
    """
    times = np.asarray(times, dtype=float)
    lambda0 = source.lambda0
    grid = grid or FrequencyGrid(lambda0)
    t_span = float(np.max(np.abs(times))) if times.size else 0.0
    needed = int(np.ceil(0.75 * lambda0 * t_span)) + 12
    if grid.n_nodes < needed:
        warnings.warn(
            f"frequency grid ({grid.n_nodes} nodes) under-resolves e^(-it*lambda) "
            f"out to |t| = {t_span:.3g}; {needed} nodes recommended"
        )
    lams, ws = grid.nodes, grid.weights
    fhat = source.spectrum(lams)  # (n_lams, n_modes)
    n_modes = (lmax + 1) ** 2
    if fhat.shape[1] != n_modes:
        raise ValueError("source mode count does not match lmax")

    out_spec = np.zeros((lams.size, n_modes), dtype=complex)
    if _is_radial(c):
        blocks = data_blocks_on_grid(c, grid, lmax)
        for ell in range(lmax + 1):
            sl = slice(ell * ell, (ell + 1) * (ell + 1))
            out_spec[:, sl] = blocks[:, ell : ell + 1] * fhat[:, sl]
    else:
        for i, la in enumerate(lams):
            out_spec[i] = data_operator(la, c, lmax=lmax, **kwargs).matrix @ fhat[i]
    if include_free:
        for i, la in enumerate(lams):
            free = free_single_layer_blocks(la, lmax)
            out_spec[i] += np.repeat(free, 2 * np.arange(lmax + 1) + 1) * fhat[i]

    phase = np.exp(-1j * np.outer(times, lams))
    coeffs = (phase * ws[None, :]) @ out_spec / (2.0 * np.pi)
    return TraceSeries(times=times, coeffs=coeffs, lmax=lmax)
