"""Outgoing Helmholtz resolvent R_c(lambda) = (-c^2 Delta - lambda^2)^{-1}.

Two independent realizations:

* a Lippmann-Schwinger volume integral solver on the voxel grid, with the
  free-space kernel applied by FFT convolution on a doubled grid, and
* a semi-analytic solver for layered radial media built from spherical
  Bessel functions, used as an oracle and as the fast path for radial
  models.

The outgoing convention is the continuation from Im(lambda) > 0: the free
kernel is exp(i*lambda*r)/(4*pi*r) with signed lambda, so that the solution
at -lambda is the complex conjugate of the solution at +lambda for real
sources.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import (
    DegenerateFrequencyError,
    GridMismatchError,
    SingularKernelError,
    SolverStagnationError,
)
from .model import VoxelGrid, Wavespeed
from .special import spherical_h1_all, spherical_h2_all, spherical_jn_all, spherical_yn_all

DEFAULT_TOL = 1e-8
DEFAULT_RESTART = 30
DEFAULT_MAXITER = 510  # total inner iterations


@dataclass(frozen=True)
class VolumeField:
    """Complex field on the voxel grid of the computational cube."""

    grid: VoxelGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.n,) * 3:
            raise GridMismatchError("field raster does not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite entries")


def free_green(lam: float, x, y) -> complex:
    """Outgoing free-space kernel exp(i*lam*|x-y|) / (4*pi*|x-y|)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(x - y)
    if r == 0.0:
        raise SingularKernelError("free_green evaluated at coincident points")
    return np.exp(1j * lam * r) / (4.0 * np.pi * r)


def self_cell_mean(lam: float, h: float) -> complex:
    """Mean of the free kernel over the ball of volume h^3 (the self cell).

    Closed form (exp(i*lam*a)*(1 - i*lam*a) - 1) / (lam^2 * (4pi/3) a^3) with
    a the equivalent radius; the lam -> 0 limit is 3/(8*pi*a).
    """
    a = (3.0 * h**3 / (4.0 * np.pi)) ** (1.0 / 3.0)
    vol = 4.0 * np.pi * a**3 / 3.0
    z = lam * a
    if abs(z) < 1e-2:
        # series of (exp(iz)(1-iz) - 1)/z^2; the closed form cancels
        # catastrophically for small z
        series = (
            0.5
            + 1j * z / 3.0
            - z**2 / 8.0
            - 1j * z**3 / 30.0
            + z**4 / 144.0
            + 1j * z**5 / 840.0
        )
        return a**2 * series / vol
    return (np.exp(1j * z) * (1.0 - 1j * z) - 1.0) / (lam**2 * vol)


class FreeConvolution:
    """FFT application of the free resolvent on a fixed grid at fixed lambda.

    The kernel table carries the voxel volume, so apply() is the Riemann-sum
    volume potential u(x_i) = sum_j K(x_i - x_j) f(x_j) h^3 with the singular
    voxel replaced by its analytic cell mean.
    """

    def __init__(self, grid: VoxelGrid, lam: float):
        self.grid = grid
        self.lam = float(lam)
        n, h = grid.n, grid.spacing
        idx = np.arange(2 * n)
        off = np.where(idx < n, idx, idx - 2 * n) * h
        ox, oy, oz = np.meshgrid(off, off, off, indexing="ij")
        r = np.sqrt(ox * ox + oy * oy + oz * oz)
        r[0, 0, 0] = 1.0
        kern = np.exp(1j * self.lam * r) / (4.0 * np.pi * r)
        kern[0, 0, 0] = self_cell_mean(self.lam, h)
        self._khat = np.fft.fftn(kern * grid.volume_element)

    def apply(self, f: np.ndarray) -> np.ndarray:
        n = self.grid.n
        fhat = np.fft.fftn(f, s=(2 * n,) * 3, axes=(0, 1, 2))
        out = np.fft.ifftn(self._khat * fhat)
        return np.ascontiguousarray(out[:n, :n, :n])


def apply_free_resolvent(lam: float, f: VolumeField) -> VolumeField:
    """Volume potential R_1(lambda) f by zero-padded FFT convolution."""
    conv = FreeConvolution(f.grid, lam)
    return VolumeField(f.grid, conv.apply(np.asarray(f.values, dtype=complex)))


class LippmannSchwingerSolver:
    """Krylov solution of u = G[c^{-2} f + lam^2 (c^{-2} - 1) u].

    Restarted GMRES on the fixed-point defect; the same factorized state
    (kernel FFT, contrast) serves repeated right-hand sides, transposed and
    conjugated solves.
    """

    def __init__(
        self,
        c: Wavespeed,
        lam: float,
        tol: float = DEFAULT_TOL,
        restart: int = DEFAULT_RESTART,
        maxiter: int = DEFAULT_MAXITER,
        conv: FreeConvolution | None = None,
    ):
        self.c = c
        self.lam = float(lam)
        self.tol = float(tol)
        self.restart = restart
        self.maxiter = maxiter
        self.grid = c.grid
        self.conv = conv if conv is not None else FreeConvolution(c.grid, lam)
        self.inv_c2 = 1.0 / np.asarray(c.values, dtype=float) ** 2
        self.contrast = self.inv_c2 - 1.0
        self._homogeneous = not np.any(self.contrast)

    def _matvec(self, u_flat: np.ndarray) -> np.ndarray:
        u = u_flat.reshape((self.grid.n,) * 3)
        return (u - self.lam**2 * self.conv.apply(self.contrast * u)).ravel()

    def _krylov(self, b: np.ndarray) -> np.ndarray:
        shape = (self.grid.n,) * 3
        if self._homogeneous:
            return b.copy()
        nrm = np.linalg.norm(b)
        if nrm == 0.0:
            return np.zeros(shape, dtype=complex)
        n3 = b.size
        op = LinearOperator((n3, n3), matvec=self._matvec, dtype=complex)
        outer = max(1, int(np.ceil(self.maxiter / self.restart)))
        x, info = gmres(
            op, b.ravel(), rtol=self.tol, atol=0.0, restart=self.restart, maxiter=outer
        )
        if info != 0:
            res = np.linalg.norm(self._matvec(x) - b.ravel()) / nrm
            if res > 10.0 * self.tol:
                raise SolverStagnationError(
                    f"GMRES stagnated at relative residual {res:.3e} "
                    f"(lam={self.lam}, tol={self.tol})",
                    residual=res,
                )
        return x.reshape(shape)

    def solve(self, f: np.ndarray) -> np.ndarray:
        """u with (-c^2 Delta - lam^2) u = f in the volume-potential sense."""
        b = self.conv.apply(self.inv_c2 * np.asarray(f, dtype=complex))
        return self._krylov(b)

    def solve_transpose(self, g: np.ndarray) -> np.ndarray:
        """Transpose solve: S^T g = c^2 S(c^{-2} g) (bilinear pairing)."""
        u = self.solve(np.asarray(g, dtype=complex) * self.inv_c2)
        return u / self.inv_c2

    def solve_adjoint(self, g: np.ndarray) -> np.ndarray:
        """Hermitian-adjoint solve in the plain l2 pairing."""
        return np.conj(self.solve_transpose(np.conj(np.asarray(g, dtype=complex))))

    def residual(self, u: np.ndarray, f: np.ndarray) -> float:
        b = self.conv.apply(self.inv_c2 * np.asarray(f, dtype=complex))
        return float(
            np.linalg.norm(self._matvec(u.ravel()) - b.ravel()) / np.linalg.norm(b)
        )


def solve_lippmann_schwinger(
    lam: float, c: Wavespeed, f: VolumeField, tol: float = DEFAULT_TOL
) -> VolumeField:
    """Solve (-c^2 Delta - lambda^2) u = f on the grid of f."""
    if not c.grid.compatible(f.grid):
        raise GridMismatchError("wavespeed and source live on different grids")
    if tol <= 0:
        raise ValueError("tol must be positive")
    solver = LippmannSchwingerSolver(c, lam, tol=tol)
    return VolumeField(f.grid, solver.solve(np.asarray(f.values, dtype=complex)))


def discrete_pde_residual(
    u: np.ndarray, f: np.ndarray, c: Wavespeed, lam: float, margin: int = 2
) -> float:
    """Relative residual of (-c^2 Delta_h - lam^2) u = f on interior voxels.

    Delta_h is the 7-point Laplacian; ``margin`` voxels are trimmed from each
    face where the stencil or the truncated convolution is unreliable.
    """
    h = c.grid.spacing
    lap = np.zeros_like(np.asarray(u, dtype=complex))
    lap[1:-1, 1:-1, 1:-1] = (
        u[2:, 1:-1, 1:-1]
        + u[:-2, 1:-1, 1:-1]
        + u[1:-1, 2:, 1:-1]
        + u[1:-1, :-2, 1:-1]
        + u[1:-1, 1:-1, 2:]
        + u[1:-1, 1:-1, :-2]
        - 6.0 * u[1:-1, 1:-1, 1:-1]
    ) / h**2
    res = -np.asarray(c.values) ** 2 * lap - lam**2 * u - f
    sl = slice(margin, -margin)
    inner = (sl, sl, sl)
    return float(np.linalg.norm(res[inner]) / np.linalg.norm(np.asarray(f)[inner]))


# ---------------------------------------------------------------------------
# Layered radial medium: semi-analytic solve per spherical-harmonic degree.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialLayers:
    """Piecewise-constant radial wavespeed: speeds[i] on the i-th shell.

    radii are the increasing interface radii; the medium has speed 1 outside
    the outermost interface.
    """

    radii: tuple[float, ...]
    speeds: tuple[float, ...]

    def __post_init__(self):
        if len(self.radii) != len(self.speeds):
            raise ValueError("radii and speeds must have equal length")
        if any(r2 <= r1 for r1, r2 in zip(self.radii, self.radii[1:])):
            raise ValueError("radii must be strictly increasing")
        if self.radii and (self.radii[0] <= 0.0 or self.radii[-1] >= 1.0):
            raise ValueError("interfaces must lie strictly inside the unit ball")
        if any(s <= 0 for s in self.speeds):
            raise ValueError("speeds must be positive")

    def speed_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        edges = (0.0,) + self.radii
        for i, s in enumerate(self.speeds):
            out[(r >= edges[i]) & (r < edges[i + 1])] = s
        return out


def layers_from_model(b, radii) -> RadialLayers:
    b = np.asarray(b, dtype=float).ravel()
    return RadialLayers(radii=tuple(float(r) for r in radii), speeds=tuple(b))


class _RegionBasis:
    """Scaled fundamental solutions of the mode-ell radial equation on a shell."""

    def __init__(self, ell: int, lam: float, speed: float, lo: float, hi: float, kind: str):
        self.ell = ell
        self.lam = float(lam)
        self.k = abs(lam) / speed
        self.kind = kind  # "inner" (j only), "shell" (j and y), "outgoing" (h)
        self.lo = lo
        self.hi = hi
        self._laplace = abs(lam) == 0.0
        if self._laplace:
            self.scale = (1.0, 1.0)
            return
        if kind == "outgoing":
            href = self._h_unscaled(np.asarray([max(lo, 1e-12)]))[0]
            self.scale = (max(abs(href), 1e-280), 1.0)
        else:
            jref = spherical_jn_all(ell, np.asarray([self.k * hi]))[ell, 0]
            ref_y_r = max(self.k * lo, 1e-8)
            yref = spherical_yn_all(ell, np.asarray([ref_y_r]))[ell, 0] if kind == "shell" else 1.0
            self.scale = (max(abs(jref), 1e-280), max(abs(yref), 1e-280))

    def _h_unscaled(self, r):
        tab = (
            spherical_h1_all(self.ell, abs(self.lam) * r)
            if self.lam >= 0
            else spherical_h2_all(self.ell, abs(self.lam) * r)
        )
        return tab[self.ell]

    def n_basis(self) -> int:
        return 1 if self.kind in ("inner", "outgoing") else 2

    def values(self, r) -> np.ndarray:
        """Basis values at radii r, shape (n_basis, len(r))."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        ell = self.ell
        if self._laplace:
            if self.kind == "inner":
                return ((r / self.hi) ** ell)[None]
            if self.kind == "outgoing":
                return ((max(self.lo, 1e-12) / r) ** (ell + 1))[None]
            return np.stack([(r / self.hi) ** ell, (self.lo / r) ** (ell + 1)])
        if self.kind == "outgoing":
            return (self._h_unscaled(r) / self.scale[0])[None]
        j = spherical_jn_all(ell, self.k * r)[ell] / self.scale[0]
        if self.kind == "inner":
            return j[None]
        y = spherical_yn_all(ell, self.k * r)[ell] / self.scale[1]
        return np.stack([j, y])

    def derivatives(self, r) -> np.ndarray:
        """Radial derivatives of the basis at r, shape (n_basis, len(r))."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        ell = self.ell
        if self._laplace:
            if self.kind == "inner":
                return (ell * r ** max(ell - 1, 0) / self.hi**ell)[None] if ell > 0 else np.zeros((1, r.size))
            if self.kind == "outgoing":
                lo = max(self.lo, 1e-12)
                return (-(ell + 1) * lo ** (ell + 1) / r ** (ell + 2))[None]
            d1 = ell * r ** max(ell - 1, 0) / self.hi**ell if ell > 0 else np.zeros(r.size)
            d2 = -(ell + 1) * self.lo ** (ell + 1) / r ** (ell + 2)
            return np.stack([d1, d2])
        k = self.k
        if self.kind == "outgoing":
            la = abs(self.lam)
            tabs = (
                spherical_h1_all(ell + 1, la * r) if self.lam >= 0 else spherical_h2_all(ell + 1, la * r)
            )
            h = tabs[ell]
            hp = tabs[ell - 1] - (ell + 1) / (la * r) * h if ell >= 1 else -tabs[1]
            return (la * hp / self.scale[0])[None]
        jt = spherical_jn_all(ell + 1, k * r)
        jp = jt[ell - 1] - (ell + 1) / (k * r) * jt[ell] if ell >= 1 else -jt[1]
        dj = (k * jp / self.scale[0])[None]
        if self.kind == "inner":
            return dj
        yt = spherical_yn_all(ell + 1, k * r)
        yp = yt[ell - 1] - (ell + 1) / (k * r) * yt[ell] if ell >= 1 else -yt[1]
        return np.concatenate([dj, (k * yp / self.scale[1])[None]])


@dataclass
class RadialSolution:
    """Per-layer coefficient set for one spherical-harmonic degree."""

    lam: float
    ell: int
    edges: tuple[float, ...]  # region boundaries, excluding 0 and infinity
    bases: list
    coeffs: list
    condition: float

    def region_of(self, r: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self.edges), r, side="right")

    def __call__(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros(r.shape, dtype=complex)
        reg = self.region_of(r)
        for i, (basis, cf) in enumerate(zip(self.bases, self.coeffs)):
            m = reg == i
            if np.any(m):
                out[m] = cf @ basis.values(r[m])
        return out

    def derivative(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros(r.shape, dtype=complex)
        reg = self.region_of(r)
        for i, (basis, cf) in enumerate(zip(self.bases, self.coeffs)):
            m = reg == i
            if np.any(m):
                out[m] = cf @ basis.derivatives(r[m])
        return out

    @property
    def trace(self) -> complex:
        """Value at r = 1 (evaluated from the outside region for surface sources)."""
        return complex(self(np.asarray([1.0]))[0])


def solve_radial(
    lam: float,
    layers: RadialLayers,
    ell: int,
    source: str = "surface",
    density: complex = 1.0,
    dirichlet_value: complex = 1.0,
    cond_limit: float = 1e12,
) -> RadialSolution:
    """Mode-ell solution for a layered radial medium.

    source="surface": (-c^2 Delta - lam^2) u = density * Y_lm dS on the unit
    sphere, outgoing at infinity (unit-density derivative jump -density at
    r=1).  source="dirichlet": interior problem on the unit ball with
    u(1) = dirichlet_value (used for the Dirichlet-to-Neumann map).
    """
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    radii = layers.radii
    speeds = layers.speeds

    if source == "surface":
        edges = tuple(radii) + (1.0,)
        region_speeds = tuple(speeds) + (1.0,)
        kinds = ["inner"] + ["shell"] * (len(edges) - 1) + ["outgoing"]
        spans = [(0.0, edges[0])] + [
            (edges[i], edges[i + 1]) for i in range(len(edges) - 1)
        ] + [(1.0, np.inf)]
        all_speeds = list(region_speeds) + [1.0]
    elif source == "dirichlet":
        edges = tuple(radii)
        kinds = ["inner"] + ["shell"] * len(edges)
        spans = [(0.0, edges[0] if edges else 1.0)] + [
            (edges[i], edges[i + 1] if i + 1 < len(edges) else 1.0)
            for i in range(len(edges))
        ]
        all_speeds = list(speeds) + [1.0]
        if not edges:
            kinds = ["inner"]
            spans = [(0.0, 1.0)]
            all_speeds = [speeds[0] if speeds else 1.0]
    else:
        raise ValueError(f"unknown source kind {source!r}")

    bases = [
        _RegionBasis(ell, lam, all_speeds[i], spans[i][0], spans[i][1], kinds[i])
        for i in range(len(kinds))
    ]
    sizes = [b.n_basis() for b in bases]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_unknown = int(offsets[-1])

    match_edges = list(edges) if source == "surface" else list(edges)
    n_eq = 2 * len(match_edges) + (1 if source == "dirichlet" else 0)
    A = np.zeros((n_eq, n_unknown), dtype=complex)
    rhs = np.zeros(n_eq, dtype=complex)

    row = 0
    for i, s in enumerate(match_edges):
        rv = np.asarray([s])
        vl, vr = bases[i].values(rv)[:, 0], bases[i + 1].values(rv)[:, 0]
        dl, dr = bases[i].derivatives(rv)[:, 0], bases[i + 1].derivatives(rv)[:, 0]
        A[row, offsets[i] : offsets[i + 1]] = vl
        A[row, offsets[i + 1] : offsets[i + 2]] = -vr
        row += 1
        A[row, offsets[i] : offsets[i + 1]] = -dl
        A[row, offsets[i + 1] : offsets[i + 2]] = dr
        if source == "surface" and i == len(match_edges) - 1:
            # derivative jump u'(1+) - u'(1-) = -density / c(1)^2, c(1) = 1
            rhs[row] = -density
        row += 1
    if source == "dirichlet":
        rv = np.asarray([1.0])
        A[row, offsets[-2] : offsets[-1]] = bases[-1].values(rv)[:, 0]
        rhs[row] = dirichlet_value
        row += 1

    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_limit:
        raise DegenerateFrequencyError(
            f"radial interface system ill-conditioned (cond={cond:.3e}) at "
            f"lam={lam}, ell={ell}: near an interior eigenvalue"
        )
    sol = np.linalg.solve(A, rhs)
    coeffs = [sol[offsets[i] : offsets[i + 1]] for i in range(len(bases))]
    result = RadialSolution(
        lam=float(lam), ell=ell, edges=edges, bases=bases, coeffs=coeffs, condition=float(cond)
    )
    # The per-region basis scaling keeps the matrix tame even at an interior
    # eigenvalue, so also flag resonant blowup of the solution itself.
    probes = (
        np.asarray(sorted({0.5 * edges[0], *edges})) if edges else np.asarray([0.5, 1.0])
    )
    amp = float(np.max(np.abs(result(probes))))
    data_scale = max(abs(density), abs(dirichlet_value), 1e-30)
    if amp > cond_limit * data_scale:
        raise DegenerateFrequencyError(
            f"resonant amplification {amp:.3e} at lam={lam}, ell={ell}: "
            f"frequency is numerically at an interior eigenvalue"
        )
    return result


def free_single_layer_value(lam: float, ell: int) -> complex:
    """Closed form i*lam*j_l(lam)*h1_l(lam) for c == 1 (its -lam conjugate for lam < 0)."""
    if lam == 0.0:
        return 1.0 / (2.0 * ell + 1.0)
    la = abs(lam)
    j = spherical_jn_all(ell, np.asarray([la]))[ell, 0]
    h = spherical_h1_all(ell, np.asarray([la]))[ell, 0]
    val = 1j * la * j * h
    return val if lam > 0 else np.conj(val)


# ---------------------------------------------------------------------------
# Resolvent norm probes.
# ---------------------------------------------------------------------------


def _smoothstep(t: np.ndarray) -> np.ndarray:
    def f(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a, b = f(t), f(1.0 - t)
    return b / (a + b)


def radial_bump(grid: VoxelGrid, inner: tuple[float, float] | None, outer: tuple[float, float]) -> np.ndarray:
    """Smooth radial cutoff: rises across ``inner`` (or 1 at the origin) and
    falls to 0 across ``outer``."""
    r = grid.radii()
    chi = _smoothstep((r - outer[0]) / (outer[1] - outer[0]))
    if inner is not None:
        chi = chi * _smoothstep((inner[1] - r) / (inner[1] - inner[0]))
    return chi


@dataclass
class ResolventNormTable:
    """Estimated cutoff-resolvent norms over a lambda sample."""

    lams: np.ndarray
    norms: np.ndarray
    cutoff: str

    @property
    def a_c(self) -> float:
        """1 + max over the sampled interval."""
        return 1.0 + float(np.max(self.norms))

    def write_csv(self, path, header_comment: str | None = None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["lambda", "norm"])
            for lam, nrm in zip(self.lams, self.norms):
                w.writerow([f"{lam:.17g}", f"{nrm:.17g}"])


def operator_norm_power(apply_a, apply_ah, shape, rtol: float = 1e-3, maxiter: int = 60, seed: int = 0) -> float:
    """Largest singular value of A by power iteration on A^H A."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(maxiter):
        w = apply_ah(apply_a(v))
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        new_sigma = np.sqrt(nrm)
        v = w / nrm
        if abs(new_sigma - sigma) <= rtol * new_sigma:
            return float(new_sigma)
        sigma = new_sigma
    return float(sigma)


def estimate_resolvent_norm(
    lam_grid,
    c: Wavespeed,
    cutoff: str = "near",
    rtol: float = 1e-3,
    solver_tol: float = 1e-8,
    seed: int = 0,
    near_params: tuple[float, float] = (1.02, 1.30),
    far_params: tuple[float, float, float, float] = (1.05, 1.15, 1.35, 1.45),
) -> ResolventNormTable:
    """Power-iteration estimate of ||chi R_c(lam) chi|| over a lambda sample.

    cutoff="near" uses chi_0 == 1 on a neighborhood of the closed unit ball;
    cutoff="far" uses an annular chi_1 supported away from the scatterer.
    """
    if cutoff == "near":
        chi = radial_bump(c.grid, None, near_params)
    elif cutoff == "far":
        a0, a1, b0, b1 = far_params
        chi = radial_bump(c.grid, (a0, a1), (b0, b1))
    else:
        raise ValueError("cutoff must be 'near' or 'far'")

    lams = np.asarray(sorted(lam_grid), dtype=float)
    norms = np.zeros(lams.shape)
    for i, lam in enumerate(lams):
        solver = LippmannSchwingerSolver(c, lam, tol=solver_tol)

        def apply_a(v):
            return chi * solver.solve(chi * v)

        def apply_ah(v):
            return chi * solver.solve_adjoint(chi * v)

        norms[i] = operator_norm_power(
            apply_a, apply_ah, (c.grid.n,) * 3, rtol=rtol, seed=seed
        )
    return ResolventNormTable(lams=lams, norms=norms, cutoff=cutoff)
