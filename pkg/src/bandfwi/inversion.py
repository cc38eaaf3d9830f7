"""Frechet derivative, adjoint gradient routes, and the Landweber iteration.

All model-to-data maps are flattened into weighted coordinate vectors so
that the data-space (Y) inner product is the plain l2 product: each
per-frequency Hilbert-Schmidt block is scaled by
sqrt(w_i / (4 pi lambda0)), with the (2l+1) degeneracy folded in on the
radial fast path.  Gradients are then literal conjugate-transposes, and the
adjoint-state route can be checked against the assembled-matrix route to
machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import DataOperator, SphereQuadrature, SurfaceContext, multipliers
from .errors import InvalidModelError, ScaleTooLargeError
from .helmholtz import FreeConvolution, LippmannSchwingerSolver
from .model import Ball, DomainPartition, Wavespeed, validate_model, wavespeed_from_model
from .radial import RadialGeometry, solve_radial_modes
from .timedomain import FrequencyGrid


class RadialForwardMap:
    """Fast semi-analytic forward map for radial partitions.

    Data vectors are per-(frequency node, degree) values of the difference
    operator in H^{+-1/2}-orthonormal coordinates, scaled so the plain l2
    norm equals the Y norm.
    """

    def __init__(self, radii, grid: FrequencyGrid, lmax: int = 8, quad_order: int = 48):
        self.geometry = RadialGeometry(radii, lmax, quad_order)
        self.grid = grid
        self.lmax = lmax
        mult = self.geometry.mult  # (2l+1)
        w = np.outer(grid.weights, mult) / (4.0 * np.pi * grid.lambda0)
        self.sqrt_w = np.sqrt(w).ravel()

    @property
    def n_params(self) -> int:
        return self.geometry.n_params

    @property
    def n_data(self) -> int:
        return self.grid.n_nodes * (self.lmax + 1)

    def _assemble(self, b, need_jacobian: bool) -> tuple[np.ndarray, np.ndarray | None]:
        """Per-node data rows (and Jacobian blocks), filling negative nodes by
        conjugation symmetry of the outgoing kernel."""
        b = validate_model(b, self.n_params)
        n = self.grid.n_nodes
        L = self.lmax + 1
        rows = np.empty((n, L), dtype=complex)
        jac = np.empty((n, L, self.n_params), dtype=complex) if need_jacobian else None
        seen: dict[float, int] = {}
        for i, la in enumerate(self.grid.nodes):
            mirror = seen.get(-la)
            if mirror is not None:
                rows[i] = np.conj(rows[mirror])
                if need_jacobian:
                    jac[i] = np.conj(jac[mirror])
                continue
            if need_jacobian:
                rows[i], jac[i] = self.geometry.data_and_jacobian(b, la)
            else:
                rows[i] = self.geometry.data_values(b, la)
            seen[la] = i
        return rows, jac

    def data(self, b) -> np.ndarray:
        """Weighted flattened data vector, length n_data."""
        rows, _ = self._assemble(b, need_jacobian=False)
        return self.sqrt_w * rows.ravel()

    def jacobian(self, b) -> np.ndarray:
        """Weighted flattened Jacobian, shape (n_data, n_params)."""
        _, jac = self._assemble(b, need_jacobian=True)
        return self.sqrt_w[:, None] * jac.reshape(self.n_data, self.n_params)

    def data_and_jacobian_flat(self, b) -> tuple[np.ndarray, np.ndarray]:
        rows, jac = self._assemble(b, need_jacobian=True)
        return (
            self.sqrt_w * rows.ravel(),
            self.sqrt_w[:, None] * jac.reshape(self.n_data, self.n_params),
        )

    def misfit(self, b, data_ref: np.ndarray) -> float:
        d = self.data(b) - data_ref
        return float(np.real(np.vdot(d, d)))

    def gradient(self, b, data_ref: np.ndarray) -> np.ndarray:
        """Assembled-matrix gradient DF(b)^* (F(b) - data_ref)."""
        residual = self.data(b) - data_ref
        return np.real(self.jacobian(b).conj().T @ residual)

    def gradient_adjoint_state(self, b, data_ref: np.ndarray) -> np.ndarray:
        """Adjoint-state gradient: back-propagated residual fields at -lambda
        correlated with the forward fields, integrated per shell.

        The final per-shell radial integrals are the restriction of the
        volume projection onto piecewise-constant models.
        """
        b = np.asarray(b, dtype=float)
        geo = self.geometry
        residual = (self.data(b) - data_ref) / self.sqrt_w
        residual = residual.reshape(self.grid.n_nodes, self.lmax + 1)
        mult = geo.mult
        qmult = geo.sqrt_mult  # (1+l(l+1))^{1/2}
        grad = np.zeros(self.n_params)
        layers = geo.layers(b)
        for i, la in enumerate(self.grid.nodes):
            fwd = solve_radial_modes(la, layers, self.lmax)
            back = solve_radial_modes(-la, layers, self.lmax)
            scale = -2.0 * la**2 * self.grid.weights[i] / (4.0 * np.pi * self.grid.lambda0)
            for j in range(self.n_params):
                r, w = geo.mesh[j]
                u = fwd.profiles(r, j)
                z = back.profiles(r, j) * residual[i][:, None]
                corr = (u * np.conj(z) * (r**2 * w)[None, :]).sum(axis=1)
                grad[j] += scale * b[j] ** (-3.0) * float(
                    np.real(np.sum(mult * qmult * corr))
                )
        return grad

    def frechet_blocks(self, b, h, lam: float) -> np.ndarray:
        """Per-degree derivative values dM(lam)[h] (unweighted coordinates)."""
        _, jac = self.geometry.data_and_jacobian(np.asarray(b, dtype=float), lam)
        return jac @ np.asarray(h, dtype=float)


class GridForwardMap:
    """Voxel-grid forward map through the Lippmann-Schwinger solver.

    Uses a trilinear trace operator whose adjoint is exact, so that the
    chained-solve derivative and the adjoint-state gradient form an exactly
    transposed pair on the discrete level.
    """

    def __init__(
        self,
        partition: DomainPartition,
        grid: FrequencyGrid,
        lmax: int = 4,
        solver_tol: float = 1e-10,
    ):
        self.partition = partition
        self.grid = grid
        self.lmax = lmax
        self.solver_tol = solver_tol
        self.quad = SphereQuadrature(lmax)
        self.surface = SurfaceContext(partition.grid, self.quad)
        self.mult = multipliers(lmax)
        self.n_modes = (lmax + 1) ** 2
        self.sqrt_w = np.sqrt(
            np.repeat(grid.weights, self.n_modes * self.n_modes)
            / (4.0 * np.pi * grid.lambda0)
        )
        self._trace_cache: dict = {}

    @property
    def n_params(self) -> int:
        return self.partition.n_params

    # -- trilinear trace with exact adjoint ---------------------------------

    def _trace_ops(self, lam: float):
        key = float(lam)
        if key in self._trace_cache:
            return self._trace_cache[key]
        g = self.partition.grid
        pts = self.quad.points(self.surface.r_match)
        frac = (pts + g.half_side) / g.spacing - 0.5
        base = np.floor(frac).astype(int)
        t = frac - base
        corners = []
        weights = []
        for dx in (0, 1):
            for dy in (0, 1):
                for dz in (0, 1):
                    idx = base + np.array([dx, dy, dz])
                    wgt = (
                        (t[:, 0] if dx else 1 - t[:, 0])
                        * (t[:, 1] if dy else 1 - t[:, 1])
                        * (t[:, 2] if dz else 1 - t[:, 2])
                    )
                    corners.append(np.ravel_multi_index(idx.T, (g.n,) * 3))
                    weights.append(wgt)
        corners = np.stack(corners)
        weights = np.stack(weights)
        ratios = self.surface._continuation_ratios(lam)
        mode_scale = np.repeat(ratios, 2 * np.arange(self.quad.lmax + 1) + 1)
        mode_scale = mode_scale * self.mult**0.25
        analysis = self.quad._analysis
        self._trace_cache[key] = (corners, weights, analysis, mode_scale)
        return self._trace_cache[key]

    def _trace_apply(self, u: np.ndarray, lam: float) -> np.ndarray:
        corners, weights, analysis, mode_scale = self._trace_ops(lam)
        samples = (u.ravel()[corners] * weights).sum(axis=0)
        return mode_scale * (analysis @ samples)

    def _trace_adjoint(self, q: np.ndarray, lam: float) -> np.ndarray:
        corners, weights, analysis, mode_scale = self._trace_ops(lam)
        node_vals = analysis.conj().T @ (np.conj(mode_scale) * q)
        g = self.partition.grid
        out = np.zeros(g.n**3, dtype=complex)
        for c, w in zip(corners, weights):
            np.add.at(out, c, w * node_vals)
        return out.reshape((g.n,) * 3)

    # -- forward data --------------------------------------------------------

    def _solver(self, b, lam: float) -> LippmannSchwingerSolver:
        c = wavespeed_from_model(b, self.partition)
        return LippmannSchwingerSolver(c, lam, tol=self.solver_tol)

    def _columns(self, solver, lam: float):
        """Forward fields and data columns for every source mode."""
        conv = solver.conv
        u_cols = []
        m_cols = []
        for col in range(self.n_modes):
            density = np.zeros(self.n_modes, dtype=complex)
            density[col] = self.mult[col] ** 0.25
            f = self.surface.spread(self.surface.compensate(density, lam))
            u = solver.solve(f)
            u_cols.append(u)
            m_cols.append(self._trace_apply(lam**2 * conv.apply(solver.contrast * u), lam))
        return u_cols, np.stack(m_cols, axis=1)

    def data_matrix(self, b, lam: float) -> np.ndarray:
        solver = self._solver(b, lam)
        _, m = self._columns(solver, lam)
        return m

    def data(self, b) -> np.ndarray:
        rows = [self.data_matrix(b, la).ravel() for la in self.grid.nodes]
        return self.sqrt_w * np.concatenate(rows)

    def misfit(self, b, data_ref: np.ndarray) -> float:
        d = self.data(b) - data_ref
        return float(np.real(np.vdot(d, d)))

    # -- derivative and adjoint ---------------------------------------------

    def frechet_matrix(self, b, h, lam: float) -> np.ndarray:
        """dM(lam)[h] by chained solves, the exact discrete derivative."""
        h = np.asarray(h, dtype=float)
        solver = self._solver(b, lam)
        conv = solver.conv
        c = solver.c.values
        hfield = np.zeros_like(c)
        for j in range(self.n_params):
            hfield[self.partition.labels == j + 1] = h[j]
        dq = -2.0 * hfield / c**3
        u_cols, _ = self._columns(solver, lam)
        out = np.zeros((self.n_modes, self.n_modes), dtype=complex)
        for col, u in enumerate(u_cols):
            eta = dq * u
            inner = eta + lam**2 * solver.contrast * solver.solve(eta / solver.inv_c2)
            out[:, col] = lam**2 * self._trace_apply(conv.apply(inner), lam)
        return out

    def jacobian(self, b) -> np.ndarray:
        cols = []
        eye = np.eye(self.n_params)
        for j in range(self.n_params):
            rows = [self.frechet_matrix(b, eye[j], la).ravel() for la in self.grid.nodes]
            cols.append(self.sqrt_w * np.concatenate(rows))
        return np.stack(cols, axis=1)

    def gradient(self, b, data_ref: np.ndarray) -> np.ndarray:
        residual = self.data(b) - data_ref
        return np.real(self.jacobian(b).conj().T @ residual)

    def gradient_adjoint_state(self, b, data_ref: np.ndarray) -> np.ndarray:
        """Exact transpose of the chained derivative: back-propagated
        residual fields correlated with the forward fields voxel-wise, then
        projected onto the partition regions."""
        residual = self.data(b) - data_ref
        blocks = residual.reshape(self.grid.n_nodes, self.n_modes, self.n_modes)
        grad = np.zeros(self.n_params)
        for i, la in enumerate(self.grid.nodes):
            solver = self._solver(b, la)
            conv = solver.conv
            c = solver.c.values
            u_cols, _ = self._columns(solver, la)
            wblock = blocks[i] * self.sqrt_w.reshape(
                self.grid.n_nodes, self.n_modes, self.n_modes
            )[i]
            corr = np.zeros((self.partition.grid.n,) * 3, dtype=complex)
            for col, u in enumerate(u_cols):
                xi = self._trace_adjoint(wblock[:, col], la)
                gxi = np.conj(conv.apply(np.conj(xi)))
                zeta = gxi + la**2 * np.conj(
                    solver.solve(np.conj(solver.contrast * gxi) / solver.inv_c2)
                )
                corr += u * np.conj(zeta)
            field = -2.0 * la**2 * np.real(corr) / c**3
            for j in range(self.n_params):
                grad[j] += field[self.partition.labels == j + 1].sum()
        return grad


# ---------------------------------------------------------------------------
# Spec-level operations.
# ---------------------------------------------------------------------------


def frechet_apply(fwd, b, h, lam: float) -> DataOperator:
    """Per-frequency derivative block dM(lam)[h] as a DataOperator."""
    if isinstance(fwd, RadialForwardMap):
        blocks = fwd.frechet_blocks(b, h, lam)
        diag = np.repeat(blocks, 2 * np.arange(fwd.lmax + 1) + 1)
        return DataOperator(lam=lam, lmax=fwd.lmax, matrix=np.diag(diag), block_values=blocks)
    return DataOperator(lam=lam, lmax=fwd.lmax, matrix=fwd.frechet_matrix(b, h, lam))


def gradient(fwd, b, data_ref: np.ndarray, route: str = "matrix") -> np.ndarray:
    """DF(b)^* (F(b) - data_ref) by either gradient route."""
    if route == "matrix":
        return fwd.gradient(b, data_ref)
    if route == "adjoint":
        return fwd.gradient_adjoint_state(b, data_ref)
    raise ValueError("route must be 'matrix' or 'adjoint'")


def remainder_probe(fwd, b, h, scales, a_c: float | None = None) -> dict:
    """Log-log slope of the Taylor remainder ||F(b+s h) - F(b) - s DF h||_Y.

    The quadratic remainder bound requires the perturbations to stay inside
    the Neumann-series regime; when an a_c estimate is supplied the
    precondition ||c'^2 - c^2|| <= 1/(2 a_c) is enforced.
    """
    b = np.asarray(b, dtype=float)
    h = np.asarray(h, dtype=float)
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    if a_c is not None:
        worst = max(
            float(np.max(np.abs((b + s * h) ** 2 - b**2))) for s in (-scales[0], scales[0])
        )
        if worst > 0.5 / a_c:
            raise ScaleTooLargeError(
                f"perturbation size {worst:.3e} exceeds 1/(2 a_c) = {0.5 / a_c:.3e}"
            )
    f0 = fwd.data(b)
    jh = fwd.jacobian(b) @ h
    residuals = []
    for s in scales:
        r = np.linalg.norm(fwd.data(b + s * h) - f0 - s * jh)
        residuals.append(r)
    residuals = np.asarray(residuals)
    slope = np.polyfit(np.log(scales), np.log(residuals), 1)[0]
    return {"scales": scales, "residuals": residuals, "slope": float(slope)}


@dataclass
class ConstantsEstimate:
    """Empirical constants of the convergence certificate."""

    l_hat: float
    l_lip: float
    c_f: float
    lambda0: float
    mu_max: float = field(init=False)
    r_ball: float = field(init=False)
    degenerate: bool = False

    def __post_init__(self):
        self.mu_max = min(1.0 / (2.0 * self.l_hat**2), 4.0 * self.c_f**2)
        denom = 2.0 * self.c_f * np.sqrt(self.l_lip * self.l_hat)
        self.r_ball = float(1.0 / denom) if denom > 0 else np.inf

    def rho(self, mu: float) -> float:
        return 1.0 - mu / (4.0 * self.c_f**2)

    def auto_mu(self, margin: float = 0.9) -> float:
        return margin * self.mu_max

    def as_dict(self) -> dict:
        return {
            "Lhat": self.l_hat,
            "L": self.l_lip,
            "C_F": self.c_f,
            "mu_max": self.mu_max,
            "R_ball": self.r_ball,
            "rho": self.rho(self.auto_mu()),
            "lambda0": self.lambda0,
        }


def sample_ball(ball: Ball, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from the model ball, clipped to the positivity floor."""
    dim = np.asarray(ball.center).size
    u = rng.standard_normal((n, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    radii = ball.radius * rng.uniform(0.0, 1.0, n) ** (1.0 / dim)
    pts = np.asarray(ball.center)[None, :] + radii[:, None] * u
    return np.maximum(pts, ball.b_min)


def estimate_constants(
    fwd, ball: Ball, samples: int = 6, seed: int = 0
) -> ConstantsEstimate:
    """Sampled bounds L-hat, L, C_F over the model ball.

    L-hat is the largest Jacobian singular value seen, L the largest
    Jacobian difference quotient, and C_F the largest ratio
    ||x - x~|| / (sqrt(2) ||F(x) - F(x~)||) over sample pairs.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    pts = sample_ball(ball, samples, rng)
    jacs = [fwd.jacobian(x) for x in pts]
    datas = [fwd.data(x) for x in pts]
    l_hat = max(np.linalg.svd(j, compute_uv=False)[0] for j in jacs)
    l_lip = 0.0
    c_f = 0.0
    degenerate = True
    for i in range(samples):
        for k in range(i + 1, samples):
            dx = np.linalg.norm(pts[i] - pts[k])
            if dx < 1e-12:
                continue
            degenerate = False
            l_lip = max(
                l_lip, np.linalg.svd(jacs[i] - jacs[k], compute_uv=False)[0] / dx
            )
            df = np.linalg.norm(datas[i] - datas[k])
            if df > 0:
                c_f = max(c_f, dx / (np.sqrt(2.0) * df))
    return ConstantsEstimate(
        l_hat=float(l_hat),
        l_lip=float(l_lip),
        c_f=float(c_f),
        lambda0=fwd.grid.lambda0,
        degenerate=degenerate,
    )


@dataclass
class LandweberState:
    """Per-iteration record of the projected Landweber iteration."""

    m: int
    x: np.ndarray
    misfit: float
    gradient: np.ndarray
    gradient_norm: float
    error: float | None = None


class StepSizeError(Exception):
    """Iteration diverged: the error doubled from its running minimum."""


def landweber_run(
    fwd,
    x0,
    x_true,
    ball: Ball,
    mu: float | str = "auto",
    n_iter: int = 200,
    constants: ConstantsEstimate | None = None,
    err_floor: float = 0.0,
    seed: int = 0,
) -> list[LandweberState]:
    """Projected Landweber iteration x <- P(x - mu DF(x)^*(F(x) - F(x_true))).

    Each step projects back onto the model ball intersected with the
    positivity floor.  Divergence (error doubling from its minimum) raises
    StepSizeError.
    """
    x = np.asarray(x0, dtype=float).copy()
    x_true = np.asarray(x_true, dtype=float)
    if not ball.contains(x) or not ball.contains(x_true):
        raise InvalidModelError("start and truth must lie in the model ball")
    if mu == "auto":
        constants = constants or estimate_constants(fwd, ball, seed=seed)
        mu = constants.auto_mu()
    mu = float(mu)
    data_ref = fwd.data(x_true)
    states: list[LandweberState] = []
    min_err = np.inf
    fused = getattr(fwd, "data_and_jacobian_flat", None)
    for m in range(n_iter + 1):
        if fused is not None:
            d, jac = fused(x)
        else:
            d, jac = fwd.data(x), fwd.jacobian(x)
        residual = d - data_ref
        mis = float(np.real(np.vdot(residual, residual)))
        grad = np.real(jac.conj().T @ residual)
        err = float(np.linalg.norm(x - x_true))
        states.append(
            LandweberState(
                m=m,
                x=x.copy(),
                misfit=mis,
                gradient=grad,
                gradient_norm=float(np.linalg.norm(grad)),
                error=err,
            )
        )
        min_err = min(min_err, err)
        if err > 2.0 * min_err and err > 10 * err_floor and min_err > 0:
            raise StepSizeError(
                f"error doubled from its minimum ({err:.3e} > 2 x {min_err:.3e}) "
                f"at iteration {m}; step size too large"
            )
        if err < err_floor or m == n_iter:
            break
        x = ball.project(x - mu * grad)
    return states
