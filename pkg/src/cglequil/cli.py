"""
Command-line entry point.

    cglequil roots --R 1 --n-max 3
    cglequil verify --config run.toml --output out/
    cglequil transform --config run.toml
    cglequil solve-gs --config gs.toml
    cglequil export --config run.toml --format vtk --format slice

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration
error, 3 numerical failure (non-convergence, domain errors, degenerate
transforms).
"""

from __future__ import annotations

import argparse
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bobnev import bobnev_roots, bobnev_state, eigen_residual, root_tolerance
from .config import RunConfig, load_config, with_overrides
from .conservation import (
    CylindricalState,
    KillingVector,
    PHI_FREE_LAWS,
    SphereQuadrature,
    cylindrical_cl_residual,
    flux_surface_integral,
    stress_divergence_residual,
    table1_flux,
    table2_flux,
)
from .errors import ConfigError, DivergenceError, EquilibriumError
from .fields import CglState, FdScheme, MhdState, ScalarField, cgl_sweep, mhd_sweep, theorem1_sweep
from .fileio import read_grid_csv, sample_state, structured_points, write_grid_csv, write_samples_csv, write_slice_csv, write_vtk
from .gs import AxisymmetricEquilibrium, FluxGrid, ProfilePair, SolverConfig, manufactured_problem, solovev, solve_gs
from .report import Check, RunReport
from .transforms import (
    EuclideanMotion,
    SurfaceFunction,
    apply_dilation,
    apply_isometry,
    apply_pressure_shift,
    apply_scaling,
    infinite_transform,
    mhd_to_cgl,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# Building states
# ---------------------------------------------------------------------------


def build_state(cfg: RunConfig):
    """(state, axisymmetric equilibrium or None) for the configured solution."""
    s = cfg.solution
    eq = None
    if s.kind == "bobnev":
        st, _, _ = bobnev_state(R=s.R, n=int(s.n), B0=s.B0, P0=s.P0)
    elif s.kind == "solovev":
        eq = solovev(beta=s.beta, alpha=s.alpha, I0=s.I0, P0=s.P0, c=s.c, k=s.k)
        st = eq.state
    else:
        grid = read_grid_csv(s.path)
        eq = AxisymmetricEquilibrium.from_grid(grid, ProfilePair.linear(s.I0, s.I1, s.P0, s.P1))
        st = eq.state
    if s.perturb_pressure:
        amp, P = s.perturb_pressure, st.P
        st = replace(st, P=ScalarField(lambda x: P(x) + amp * x[..., 0], domain=st.domain))
        eq = None
    return st, eq


def make_multiplier(t) -> SurfaceFunction:
    if t.M == "oscillatory":
        return SurfaceFunction.oscillatory(t.psi1, t.psi2)
    if t.M == "constant":
        return SurfaceFunction.constant(t.value)
    if t.M == "exponential":
        return SurfaceFunction.exponential(t.value)
    return SurfaceFunction.affine(t.a, t.b)


def apply_chain(st, transforms):
    for t in transforms:
        if t.op == "mhd_to_cgl":
            M = make_multiplier(t)
            st = infinite_transform(st, M) if isinstance(st, CglState) else mhd_to_cgl(st, M, t.P1)
        elif t.op == "scaling":
            st = apply_scaling(st, t.a4)
        elif t.op == "pressure_shift":
            st = apply_pressure_shift(st, t.a6)
        elif t.op == "dilation":
            st = apply_dilation(st, t.a5)
        else:
            st = apply_isometry(st, EuclideanMotion(tuple(t.translation), tuple(t.angles)))
    return st


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def _sample_points(st, cfg: RunConfig) -> np.ndarray:
    v = cfg.verify
    parts = []
    if v.lattice:
        parts.append(st.domain.lattice(v.lattice).reshape(-1, 3))
    if v.random_points:
        parts.append(st.domain.random_points(v.random_points, np.random.default_rng(cfg.seed)).reshape(-1, 3))
    return np.concatenate(parts) if parts else np.zeros((0, 3))


def verify_state(st, eq, cfg: RunConfig, report: RunReport) -> None:
    v = cfg.verify
    k = cfg.tolerance_scale
    scheme = FdScheme(h=v.h, order=v.order)
    pts = _sample_points(st, cfg)
    tol = v.residual_tolerance * k
    if v.residual and len(pts):
        with report.timed("residuals"):
            sweeps = [cgl_sweep(st, pts, scheme), theorem1_sweep(st, pts, scheme)] if isinstance(st, CglState) else [mhd_sweep(st, pts, scheme)]
            for r in sweeps:
                report.add(Check.at_most(f"{r.name}_residual", r.relative, tol, f"n={r.n_points}"))
    if v.stress and len(pts):
        with report.timed("stress"):
            base = mhd_sweep(st, pts, scheme) if isinstance(st, MhdState) else theorem1_sweep(st, pts, scheme)
            zmax = 1.0 + float(np.max(np.linalg.norm(pts, axis=-1)))
            scale = max(base.momentum_scale, 1e-300) * zmax
            worst = max(float(np.max(stress_divergence_residual(st, z, pts, scheme))) for z in KillingVector.basis())
            report.add(Check.at_most("stress_divergence", worst / scale, tol))
    if v.flux_radii:
        with report.timed("fluxes"):
            _flux_checks(st, cfg, report)
    if v.cylindrical:
        if eq is None:
            raise ConfigError("cylindrical checks need an unperturbed axisymmetric solution (kind = solovev or grid)")
        with report.timed("cylindrical"):
            _cylindrical_checks(eq, cfg, report)


def _flux_checks(st, cfg: RunConfig, report: RunReport) -> None:
    v = cfg.verify
    cgl = isinstance(st, CglState)
    table = table2_flux if cgl else table1_flux
    f = SurfaceFunction.affine(0.0, 1.0)
    tasks = []
    for rho in v.flux_radii:
        q = SphereQuadrature(rho, n_theta=v.flux_n_theta, n_phi=v.flux_n_phi)
        for row in v.flux_rows:
            row = "vorticity" if (cgl and row == "current") else row
            if row == "stress":
                for i, z in enumerate(KillingVector.basis()):
                    tasks.append((f"flux_{row}{i}_r{rho:g}", table(st, row, zeta=z), q))
            else:
                tasks.append((f"flux_{row}_r{rho:g}", table(st, row, f=f), q))

    def run(task):
        name, V, q = task
        return name, flux_surface_integral(V, q, rel_tol=v.flux_rel_tol * cfg.tolerance_scale)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    for name, rep in results:
        report.add(Check.at_most(name, abs(rep.value), rep.tolerance, f"scale={rep.scale:.3e} err={rep.error:.1e}"))


def _cylindrical_checks(eq: AxisymmetricEquilibrium, cfg: RunConfig, report: RunReport) -> None:
    """Each law must converge at second order (or sit at rounding level)."""
    v = cfg.verify
    cs = CylindricalState.from_axisymmetric(eq)
    rng = np.random.default_rng(cfg.seed)
    d = eq.domain
    margin = 4 * v.cylindrical_h
    n = 64
    r = rng.uniform(d.r_min + margin, d.r_max - margin, n)
    z = rng.uniform(d.z_min + margin, d.z_max - margin, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    e = np.abs(cs.energy(r, phi, z))
    floor = 1e3 * np.finfo(float).eps * float(np.max(e)) / v.cylindrical_h
    for law in range(1, 7):
        r1 = float(np.max(np.abs(cylindrical_cl_residual(cs, law, r, phi, z, h=v.cylindrical_h))))
        r2 = float(np.max(np.abs(cylindrical_cl_residual(cs, law, r, phi, z, h=v.cylindrical_h / 2))))
        if r1 <= floor:
            report.add(Check.at_most(f"cylindrical_law{law}_order", 0.0, 0.3 * cfg.tolerance_scale, f"rounding level {r1:.1e}"))
        else:
            order = float(np.log2(r1 / r2)) if r2 > 0 else float("inf")
            report.add(Check.at_most(f"cylindrical_law{law}_order", abs(order - 2.0), 0.3 * cfg.tolerance_scale, f"order={order:.3f} residual={r1:.2e}"))
        if law in PHI_FREE_LAWS:
            a = cylindrical_cl_residual(cs, law, r, phi, z, h=v.cylindrical_h)
            b = cylindrical_cl_residual(cs, law, r, phi + 1.0, z, h=v.cylindrical_h)
            report.add(Check.at_most(f"cylindrical_law{law}_phi_free", float(np.max(np.abs(a - b))), 1e-14 * cfg.tolerance_scale))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _new_report(command: str, cfg: Optional[RunConfig]) -> RunReport:
    prov = {"version": __version__, "python": platform.python_version(), "numpy": np.__version__}
    if cfg is not None:
        prov.update(config_sha256=cfg.sha256, seed=cfg.seed, threads=cfg.threads, tolerance_scale=cfg.tolerance_scale)
    return RunReport(command, provenance=prov)


def cmd_roots(args, cfg: RunConfig) -> RunReport:
    R = args.R if args.R is not None else cfg.solution.R
    n_max = args.n_max if args.n_max is not None else int(cfg.solution.n)
    if not R > 0 or n_max < 1:
        raise ConfigError("roots needs R > 0 and n_max >= 1")
    report = _new_report("roots", cfg)
    with report.timed("roots"):
        lams = bobnev_roots(R, n_max)
    rows = []
    for i, lam in enumerate(lams, 1):
        res = abs(float(eigen_residual(R * lam)))
        rows.append({"n": i, "lambda": lam, "R_lambda": R * lam, "residual": res})
        report.add(Check.at_most(f"root{i}_residual", res, root_tolerance(R * lam)))
    report.tables["roots"] = rows
    return report


def cmd_verify(args, cfg: RunConfig) -> RunReport:
    report = _new_report("verify", cfg)
    with report.timed("build"):
        st, eq = build_state(cfg)
        if cfg.transforms:
            st, eq = apply_chain(st, cfg.transforms), None
    verify_state(st, eq, cfg, report)
    return report


def _export(st, cfg: RunConfig, out: Path, formats) -> list:
    written = []
    if "vtk" in formats or "csv" in formats:
        sample = sample_state(st, structured_points(st.domain, cfg.output.samples))
        if "vtk" in formats:
            written.append(write_vtk(sample, out / "field.vtk"))
        if "csv" in formats:
            written.append(write_samples_csv(sample, out / "samples.csv"))
    if "slice" in formats:
        written.append(write_slice_csv(st, out / "slice.csv", n=cfg.output.slice_n))
    return written


def cmd_transform(args, cfg: RunConfig) -> RunReport:
    report = _new_report("transform", cfg)
    with report.timed("build"):
        st, eq = build_state(cfg)
        out_state = apply_chain(st, cfg.transforms)
    verify_state(out_state, eq if not cfg.transforms else None, cfg, report)
    with report.timed("export"):
        files = _export(out_state, cfg, Path(cfg.output.dir), ("vtk", "csv", "slice"))
    report.tables["exports"] = [{"file": str(p)} for p in files]
    return report


def cmd_export(args, cfg: RunConfig) -> RunReport:
    report = _new_report("export", cfg)
    st, _ = build_state(cfg)
    st = apply_chain(st, cfg.transforms)
    formats = tuple(args.format or ("vtk", "csv", "slice"))
    with report.timed("export"):
        files = _export(st, cfg, Path(cfg.output.dir), formats)
    report.tables["exports"] = [{"file": str(p)} for p in files]
    return report


def cmd_solve_gs(args, cfg: RunConfig) -> RunReport:
    g = cfg.solve_gs
    report = _new_report("solve-gs", cfg)
    solver = SolverConfig(max_iterations=g.max_iterations, tolerance=g.tolerance, omega=g.omega)
    rows, last = [], None
    for n in g.sizes:
        if g.case == "manufactured":
            exact, source = manufactured_problem(g.r_range, g.z_range)
            grid = FluxGrid.uniform(g.r_range, g.z_range, n, n, exact)
            grid.psi[1:-1, 1:-1] = 0.0
            kwargs = {"source": source}
        elif g.case == "solovev":
            s = cfg.solution
            eq = solovev(beta=s.beta, alpha=s.alpha, I0=s.I0, P0=s.P0, c=s.c, k=s.k)
            exact = eq.flux.psi
            grid = FluxGrid.uniform(g.r_range, g.z_range, n, n, exact)
            grid.psi[1:-1, 1:-1] = 0.0
            kwargs = {"profiles": eq.profiles}
        else:
            exact = None
            grid = FluxGrid.uniform(g.r_range, g.z_range, n, n)
            kwargs = {}
        with report.timed(f"solve_{n}"):
            try:
                sol = solve_gs(grid, config=solver, **kwargs)
            except DivergenceError as exc:
                h = exc.history
                stride = max(1, len(h) // 200)
                report.tables["divergence_history"] = [{"iteration": i * stride + 1, "max_update": u} for i, u in enumerate(h[::stride])]
                report.add(Check.at_most(f"solve_{n}_converged", float(h[-1]) if h else float("inf"), g.tolerance, str(exc)))
                report.write(Path(cfg.output.dir), cfg.output.formats)
                raise
        R, Z = sol.mesh()
        err = float(np.max(np.abs(sol.psi - exact(R, Z)))) if exact is not None else float(np.max(np.abs(sol.psi)))
        rows.append({"n": n, "h": sol.dr, "iterations": sol.iterations, "error": err, "order": float("nan"), "residual": sol.residual_norm})
        last = sol
    for a, b in zip(rows, rows[1:]):
        if a["error"] > 0 and b["error"] > 0:
            b["order"] = float(np.log(a["error"] / b["error"]) / np.log(a["h"] / b["h"]))
    report.tables["convergence"] = rows
    if exact is None:
        report.add(Check.at_most("zero_solution", rows[-1]["error"], 0.0))
    elif len(rows) > 1:
        report.add(Check.at_most("convergence_order", abs(rows[-1]["order"] - 2.0), g.order_tolerance * cfg.tolerance_scale, f"order={rows[-1]['order']:.3f}"))
    out = Path(cfg.output.dir)
    write_grid_csv(last, out / "psi.csv")
    return report


COMMANDS = {"roots": cmd_roots, "verify": cmd_verify, "transform": cmd_transform, "solve-gs": cmd_solve_gs, "export": cmd_export}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=None, help="TOML run configuration")
    common.add_argument("--output", metavar="DIR", default=None, help="output directory (overrides [output] dir)")
    common.add_argument("--tolerance-scale", type=float, default=None, metavar="FLOAT", help="multiply every tolerance")
    common.add_argument("--threads", type=int, default=None, metavar="N", help="worker threads for independent checks")
    common.add_argument("--seed", type=int, default=None, metavar="U64", help="seed for random sample sets")

    parser = argparse.ArgumentParser(prog="cglequil", description="Static MHD / CGL plasma equilibria: construction and verification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    roots = sub.add_parser("roots", parents=[common], help="eigenvalues of the spherical vortex")
    roots.add_argument("--R", type=float, default=None, help="vortex radius (default from config, 1)")
    roots.add_argument("--n-max", type=int, default=None, help="number of roots (default from config, 3)")

    sub.add_parser("verify", parents=[common], help="residual, flux and conservation-law checks")
    sub.add_parser("transform", parents=[common], help="apply the transform chain, re-verify, export")
    sub.add_parser("solve-gs", parents=[common], help="Grad-Shafranov solve with convergence table")
    exp = sub.add_parser("export", parents=[common], help="write VTK / CSV samples of a state")
    exp.add_argument("--format", action="append", choices=["vtk", "csv", "slice"], help="repeatable; default all")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    report = None
    try:
        cfg = with_overrides(
            load_config(args.config),
            output=args.output,
            tolerance_scale=args.tolerance_scale,
            threads=args.threads,
            seed=args.seed,
        )
        report = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EquilibriumError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(report.text())
    if args.command != "roots" or args.output is not None:
        report.write(Path(cfg.output.dir), cfg.output.formats)
    return EXIT_PASS if report.passed else EXIT_FAIL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
