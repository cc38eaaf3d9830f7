"""Scenario-driven batch front end.

A scenario is a flat INI file (sections of key = value pairs, no nesting);
every output file carries the config hash and toolkit version in a leading
comment line, and a fixed seed makes reruns byte-identical.

    bandfwi forward --config scenario.cfg --out results/
    bandfwi invert  --config scenario.cfg --out results/ [--seed 7]
    bandfwi weights --config scenario.cfg --out results/
    bandfwi probe   --config scenario.cfg --out results/

Exit codes: 0 success, 2 validation failure, 3 numerical failure (with a
JSON error report in the output directory when possible).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import data_operator
from .errors import BandfwiError, ValidationError
from .helmholtz import RadialLayers, estimate_resolvent_norm
from .inversion import (
    RadialForwardMap,
    StepSizeError,
    estimate_constants,
    landweber_run,
    remainder_probe,
)
from .model import Ball, VoxelGrid, labeled_partition, radial_partition, wavespeed_from_model
from .timedomain import (
    FrequencyGrid,
    TimeWindow,
    hs_misfit_frequency,
    hs_misfit_time,
    synthesize_trace,
    unit_source,
)
from .weights import build_psi, solve_u_ode, verify_weight_inequalities


@dataclass
class Scenario:
    """Validated scenario configuration."""

    path: Path
    config_hash: str
    partition_kind: str
    radii: tuple[float, ...]
    raster_path: str | None
    epsilon: float
    grid_n: int
    half_side: float
    b_true: np.ndarray
    b_init: np.ndarray
    ball: Ball
    lambda0: float
    n_nodes: int
    lmax: int
    t0: float
    l_shift: int
    solver_tol: float
    quad_order: int
    mu: float | str
    iterations: int
    err_floor: float
    samples: int
    seed: int
    weights_breaks: tuple[float, ...]
    weights_values: tuple[float, ...]
    weights_E: float
    weights_delta: float
    weights_h: float
    probe_lambdas: tuple[float, ...]
    probe_cutoff: str
    trace_times: tuple[float, ...]
    trace_mode: int
    trace_shift: int

    @property
    def header(self) -> str:
        return f"bandfwi {__version__} config_sha256={self.config_hash}"


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def load_scenario(path, seed_override: int | None = None) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    raw = path.read_bytes()
    cfg = configparser.ConfigParser()
    try:
        cfg.read_string(raw.decode())
    except configparser.Error as exc:
        raise ValidationError(f"config parse error: {exc}") from exc

    def get(section, key, fallback=None):
        return cfg.get(section, key, fallback=fallback)

    kind = get("partition", "kind", "radial")
    if kind not in ("radial", "labeled-grid"):
        raise ValidationError(f"unknown partition kind {kind!r}")
    radii = _floats(get("partition", "radii", ""))
    raster = get("partition", "raster", None)
    if kind == "radial" and not radii:
        raise ValidationError("radial partition needs interface radii")
    if kind == "labeled-grid" and not raster:
        raise ValidationError("labeled-grid partition needs a raster file")

    b_true = np.asarray(_floats(get("model", "b_true", "")), dtype=float)
    b_init = np.asarray(_floats(get("model", "b_init", "")), dtype=float)
    if b_true.size == 0 or b_init.size != b_true.size:
        raise ValidationError("b_true and b_init must be set with equal lengths")
    center = _floats(get("model", "ball_center", ""))
    center = np.asarray(center if center else 0.5 * (b_true + b_init), dtype=float)
    ball = Ball(
        center=center,
        radius=float(get("model", "ball_radius", "0.3")),
        b_min=float(get("model", "b_min", "0.2")),
    )
    lambda0 = float(get("frequency", "lambda0", "4.0"))
    if lambda0 <= 0:
        raise ValidationError("lambda0 must be positive")
    scenario = Scenario(
        path=path,
        config_hash=hashlib.sha256(raw).hexdigest(),
        partition_kind=kind,
        radii=radii,
        raster_path=raster,
        epsilon=float(get("partition", "epsilon", "0.1")),
        grid_n=int(get("grid", "n", "48")),
        half_side=float(get("grid", "half_side", "1.5")),
        b_true=b_true,
        b_init=b_init,
        ball=ball,
        lambda0=lambda0,
        n_nodes=int(get("frequency", "n_nodes", "0")),
        lmax=int(get("frequency", "l_max", "8")),
        t0=float(get("time", "t0", "0.0")),
        l_shift=int(get("time", "l_shift", str(int(8 * lambda0)))),
        solver_tol=float(get("solver", "tol", "1e-8")),
        quad_order=int(get("solver", "quad_order", "48")),
        mu=get("inversion", "mu", "auto"),
        iterations=int(get("inversion", "iterations", "200")),
        err_floor=float(get("inversion", "err_floor", "0.0")),
        samples=int(get("inversion", "samples", "6")),
        seed=seed_override if seed_override is not None else int(get("inversion", "seed", "0")),
        weights_breaks=_floats(get("weights", "v_breaks", "1.0")),
        weights_values=_floats(get("weights", "v_values", "1.0")),
        weights_E=float(get("weights", "E", "1.0")),
        weights_delta=float(get("weights", "delta", "0.05")),
        weights_h=float(get("weights", "h", "0.1")),
        probe_lambdas=_floats(get("probe", "resolvent_lambdas", "0.5 1.0 2.0")),
        probe_cutoff=get("probe", "cutoff", "near"),
        trace_times=_floats(get("probe", "trace_times", "-1.0 -0.5 0.0 0.5 1.0")),
        trace_mode=int(get("probe", "trace_mode", "0")),
        trace_shift=int(get("probe", "trace_shift", "0")),
    )
    if scenario.mu != "auto":
        scenario.mu = float(scenario.mu)
    if not scenario.ball.contains(scenario.b_true) or not scenario.ball.contains(scenario.b_init):
        raise ValidationError("b_true and b_init must lie in the model ball")
    if scenario.partition_kind == "radial" and any(
        r >= 1.0 - scenario.epsilon for r in scenario.radii
    ):
        raise ValidationError("interface radii must stay below 1 - epsilon")
    return scenario


def load_raster(path) -> np.ndarray:
    """Voxel label raster: one 'nx ny nz' header line, labels row-major."""
    with open(path) as fh:
        dims = tuple(int(t) for t in fh.readline().split())
        if len(dims) != 3:
            raise ValidationError("raster header must be 'nx ny nz'")
        flat = np.loadtxt(fh, dtype=int).ravel()
    if flat.size != np.prod(dims):
        raise ValidationError("raster size does not match its header")
    return flat.reshape(dims)


def _scenario_medium(sc: Scenario, b):
    """Radial layers for radial partitions, a Wavespeed otherwise."""
    if sc.partition_kind == "radial":
        return RadialLayers(radii=sc.radii, speeds=tuple(np.asarray(b, dtype=float)))
    grid = VoxelGrid(n=sc.grid_n, half_side=sc.half_side)
    part = labeled_partition(load_raster(sc.raster_path), grid=grid, epsilon=sc.epsilon)
    return wavespeed_from_model(b, part)


def _forward_map(sc: Scenario):
    grid = FrequencyGrid(sc.lambda0, sc.n_nodes)
    if sc.partition_kind == "radial":
        return RadialForwardMap(sc.radii, grid, lmax=sc.lmax, quad_order=sc.quad_order)
    from .inversion import GridForwardMap

    vgrid = VoxelGrid(n=sc.grid_n, half_side=sc.half_side)
    part = labeled_partition(load_raster(sc.raster_path), grid=vgrid, epsilon=sc.epsilon)
    return GridForwardMap(part, grid, lmax=sc.lmax, solver_tol=sc.solver_tol)


def _write_manifest(sc: Scenario, out: Path, command: str, extra: dict | None = None):
    payload = {
        "command": command,
        "version": __version__,
        "config_sha256": sc.config_hash,
        "config_path": str(sc.path),
        "seed": sc.seed,
    }
    if extra:
        payload.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def cmd_forward(sc: Scenario, out: Path) -> int:
    medium_true = _scenario_medium(sc, sc.b_true)
    grid = FrequencyGrid(sc.lambda0, sc.n_nodes)
    source = unit_source(sc.lambda0, sc.lmax, shift=sc.trace_shift, mode=sc.trace_mode)
    trace = synthesize_trace(
        medium_true, source, np.asarray(sc.trace_times), sc.lmax, grid=grid, include_free=False
    )
    trace.write_csv(out / "trace.csv", header_comment=sc.header)
    for la in sorted({1.0, sc.lambda0}):
        op = data_operator(la, medium_true, lmax=sc.lmax)
        op.write_csv(out / f"data_operator_lam{la:g}.csv", header_comment=sc.header)
    _write_manifest(sc, out, "forward", {"trace_rows": len(sc.trace_times)})
    return 0


def cmd_invert(sc: Scenario, out: Path) -> int:
    fwd = _forward_map(sc)
    constants = estimate_constants(fwd, sc.ball, samples=sc.samples, seed=sc.seed)
    report = constants.as_dict()
    with open(out / "constants.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    mu = constants.auto_mu() if sc.mu == "auto" else float(sc.mu)
    states = landweber_run(
        fwd,
        sc.b_init,
        sc.b_true,
        sc.ball,
        mu=mu,
        n_iter=sc.iterations,
        constants=constants,
        err_floor=sc.err_floor,
        seed=sc.seed,
    )
    rho = constants.rho(mu)
    with open(out / "iterations.csv", "w", newline="") as fh:
        fh.write(f"# {sc.header}\n")
        w = csv.writer(fh)
        w.writerow(["m", "misfit", "grad_norm", "err_to_truth", "bound_R_rho_k2"])
        for st in states:
            bound = constants.r_ball * rho ** (st.m / 2.0)
            w.writerow(
                [
                    st.m,
                    f"{st.misfit:.17g}",
                    f"{st.gradient_norm:.17g}",
                    f"{st.error:.17g}",
                    f"{bound:.17g}",
                ]
            )
    _write_manifest(sc, out, "invert", {"iterations": len(states), "mu": mu})
    return 0


def cmd_weights(sc: Scenario, out: Path) -> int:
    profile = build_psi(
        sc.weights_breaks, sc.weights_values, E=sc.weights_E, delta=sc.weights_delta
    )
    solve_u_ode(profile, sc.weights_h)
    report = verify_weight_inequalities(profile)
    profile.write_csv(out / "weights_profile.csv", header_comment=sc.header)
    report.to_json(out / "weights_report.json")
    _write_manifest(
        sc,
        out,
        "weights",
        {"B": profile.B, "R0": profile.R0, "ok": report.ok},
    )
    return 0


def cmd_probe(sc: Scenario, out: Path) -> int:
    # Resolvent norms on a coarse grid sized to the probe frequencies.
    lam_max = max(abs(l) for l in sc.probe_lambdas)
    n = max(24, sc.grid_n // 2)
    while lam_max * (2.0 * sc.half_side / n) > 0.5:
        n = int(1.5 * n)
    vgrid = VoxelGrid(n=n, half_side=sc.half_side)
    if sc.partition_kind == "radial":
        part = radial_partition(sc.radii, grid=vgrid, epsilon=sc.epsilon)
    else:
        part = labeled_partition(load_raster(sc.raster_path), grid=vgrid, epsilon=sc.epsilon)
    c = wavespeed_from_model(sc.b_true, part)
    table = estimate_resolvent_norm(
        sc.probe_lambdas, c, cutoff=sc.probe_cutoff, seed=sc.seed
    )
    table.write_csv(out / "resolvent_norms.csv", header_comment=sc.header)

    fwd = _forward_map(sc)
    rng = np.random.default_rng(sc.seed)
    h = rng.standard_normal(sc.b_true.size)
    h /= np.linalg.norm(h)
    probe = remainder_probe(fwd, sc.b_true, h, [1e-2, 5e-3, 2.5e-3])

    d, jac = fwd.data(sc.b_true), fwd.jacobian(sc.b_true)
    y = rng.standard_normal(jac.shape[0]) + 1j * rng.standard_normal(jac.shape[0])
    lhs = np.vdot(y, jac @ h).real
    rhs = float(np.real(jac.conj().T @ y) @ h)
    adjoint_defect = abs(lhs - rhs) / max(abs(lhs), 1e-300)

    medium_true = _scenario_medium(sc, sc.b_true)
    medium_init = _scenario_medium(sc, sc.b_init)
    grid = FrequencyGrid(sc.lambda0, sc.n_nodes)
    window = TimeWindow(sc.lambda0, t0=sc.t0)
    mis_f = hs_misfit_frequency(medium_true, medium_init, grid, sc.lmax)
    mis_t = hs_misfit_time(medium_true, medium_init, window, sc.l_shift, sc.lmax)
    payload = {
        "lambda0": sc.lambda0,
        "grid": grid.n_nodes,
        "misfit_freq": mis_f,
        "misfit_time": mis_t,
        "L_shift": sc.l_shift,
        "a_c": table.a_c,
        "remainder_slope": probe["slope"],
        "adjoint_defect": adjoint_defect,
    }
    with open(out / "probe_report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    _write_manifest(sc, out, "probe")
    return 0


COMMANDS = {
    "forward": cmd_forward,
    "invert": cmd_invert,
    "weights": cmd_weights,
    "probe": cmd_probe,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bandfwi", description="Band-limited boundary-data inversion toolkit"
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="scenario config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    args = parser.parse_args(argv)

    out = Path(args.out)
    try:
        scenario = load_scenario(args.config, seed_override=args.seed)
    except (ValidationError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](scenario, out)
    except (ValidationError,) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (BandfwiError, StepSizeError) as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        with open(out / "error_report.json", "w") as fh:
            json.dump(report, fh, indent=2)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
