"""Command line interface: convergence studies, Cook panel runs, export.

Outputs are CSV tables and legacy-ASCII VTK files; plotting is left to
external tools.  The EG_THREADS environment variable caps the BLAS worker
threads and is applied here before numpy is first imported.
"""
from __future__ import annotations

import os

_threads = os.environ.get("EG_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .analysis import (convergence_rates, error_norms, lshape_solution,
                       smooth2d_solution, smooth3d_solution, von_mises)
from .assembly import (ConfigurationError, ProblemSpec, assemble_system,
                       lame_from_young_poisson)
from .mesh import (REGION_FREE, REGION_LOAD, Mesh, build_cook_mesh,
                   build_lshape_mesh, build_unit_cube_mesh,
                   build_unit_square_mesh, dump_mesh)
from .solver import DEFAULT_TOL, SolverError, solve_spd
from .space import EGFunction, build_dof_map

COOK_CASES = {
    "compressible": (1.0, 1.0 / 3.0),
    "incompressible": (1.12499998125, 0.499999975),
}
COOK_PROBE = np.array([48.0, 52.0])


@dataclass
class RunConfig:
    """Resolved options of one CLI invocation."""

    command: str
    problem: str
    mu: float
    lam: float
    levels: list[int] = field(default_factory=list)
    h_list: list[float] = field(default_factory=list)
    tol: float = DEFAULT_TOL
    quad_deg: int = 4
    out: Path = Path(".")
    deterministic: bool = False
    cook_case: str | None = None


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_vtk(mesh: Mesh, point_fields: dict, cell_fields: dict, path) -> None:
    """Write a legacy-ASCII VTK unstructured grid.

    Point/cell field arrays may be (n,) scalars, (n, d) vectors (padded to
    three components) or (n, d, d) tensors (padded to 3x3).
    """
    lines = [
        "# vtk DataFile Version 3.0",
        "egelastic output",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "POINTS %d double" % mesh.n_vertices,
    ]
    pts = np.zeros((mesh.n_vertices, 3))
    pts[:, : mesh.dim] = mesh.vertices
    lines += [" ".join(_fmt(c) for c in p) for p in pts]

    k = mesh.dim + 1
    lines.append("")
    lines.append("CELLS %d %d" % (mesh.n_cells, mesh.n_cells * (k + 1)))
    lines += ["%d " % k + " ".join(str(v) for v in cell) for cell in mesh.cells]
    lines.append("")
    lines.append("CELL_TYPES %d" % mesh.n_cells)
    cell_type = "5" if mesh.dim == 2 else "10"
    lines += [cell_type] * mesh.n_cells

    def field_lines(name, values):
        values = np.asarray(values)
        if values.ndim == 1:
            out = ["SCALARS %s double 1" % name, "LOOKUP_TABLE default"]
            out += [_fmt(v) for v in values]
        elif values.ndim == 2:
            padded = np.zeros((values.shape[0], 3))
            padded[:, : values.shape[1]] = values
            out = ["VECTORS %s double" % name]
            out += [" ".join(_fmt(c) for c in row) for row in padded]
        elif values.ndim == 3:
            padded = np.zeros((values.shape[0], 3, 3))
            padded[:, : values.shape[1], : values.shape[2]] = values
            out = ["TENSORS %s double" % name]
            for tensor in padded:
                out += [" ".join(_fmt(c) for c in row) for row in tensor]
        else:
            raise ValueError("unsupported field rank for %s" % name)
        return out

    if point_fields:
        lines.append("")
        lines.append("POINT_DATA %d" % mesh.n_vertices)
        for name, values in point_fields.items():
            lines += field_lines(name, values)
    if cell_fields:
        lines.append("")
        lines.append("CELL_DATA %d" % mesh.n_cells)
        for name, values in cell_fields.items():
            lines += field_lines(name, values)

    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError("cannot write VTK file %s: %s" % (path, exc)) from exc


def read_vtk_points(path) -> np.ndarray:
    """Minimal reader for the POINTS block of files written by write_vtk."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    for i, line in enumerate(lines):
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            rows = [tuple(map(float, lines[i + 1 + j].split())) for j in range(n)]
            return np.array(rows)
    raise ValueError("no POINTS block in %s" % path)


def write_convergence_csv(path, rows: list[dict]) -> None:
    """Write the convergence table with per-step rates."""
    header = ("h,dofs,l2_err,l2_rate,h1_err,h1_rate,"
              "stress_err,stress_rate,solve_seconds")
    rates = {key: convergence_rates([(r["h"], r[key]) for r in rows])
             for key in ("l2_err", "h1_err", "stress_err")} if len(rows) > 1 else {
        key: [None] * len(rows) for key in ("l2_err", "h1_err", "stress_err")}

    def rate_str(v):
        return "" if v is None else "%.10g" % v

    out = [header]
    for i, r in enumerate(rows):
        out.append(",".join([
            _fmt(r["h"]), str(r["dofs"]),
            _fmt(r["l2_err"]), rate_str(rates["l2_err"][i]),
            _fmt(r["h1_err"]), rate_str(rates["h1_err"][i]),
            _fmt(r["stress_err"]), rate_str(rates["stress_err"][i]),
            _fmt(r["solve_seconds"]),
        ]))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def _solve_problem(mesh: Mesh, spec: ProblemSpec, tol: float):
    dofmap = build_dof_map(mesh)
    system = assemble_system(mesh, dofmap, spec)
    start = time.perf_counter()
    x, report = solve_spd(system, tol=tol)
    seconds = time.perf_counter() - start
    return EGFunction(dofmap, x), report, seconds


def _converge_cases(config: RunConfig):
    if config.problem == "square2d":
        hs = config.h_list or [1 / 8, 1 / 16, 1 / 32, 1 / 64]
        exact = smooth2d_solution(config.lam, config.mu)
        for h in hs:
            yield build_unit_square_mesh(round(1.0 / h)), exact
    elif config.problem == "cube3d":
        hs = config.h_list or [1 / 4, 1 / 8, 1 / 12, 1 / 16]
        exact = smooth3d_solution(config.lam, config.mu)
        for h in hs:
            yield build_unit_cube_mesh(round(1.0 / h)), exact
    elif config.problem == "lshape":
        levels = config.levels or [2, 3, 4, 5]
        _, exact = lshape_solution(config.mu, config.lam)
        for level in levels:
            yield build_lshape_mesh(level), exact
    else:
        raise ConfigurationError(
            "problem %r has no exact solution for converge" % config.problem)


def run_converge(config: RunConfig) -> list[dict]:
    """Solve the benchmark series and write the convergence CSV."""
    rows = []
    for mesh, exact in _converge_cases(config):
        spec = ProblemSpec(mu=config.mu, lam=config.lam,
                           body_force=exact.body_force,
                           dirichlet_data=exact.u, exact=exact,
                           cell_deg=config.quad_deg, facet_deg=config.quad_deg)
        u_h, report, seconds = _solve_problem(mesh, spec, config.tol)
        err = error_norms(u_h, spec, quad_deg=config.quad_deg)
        rows.append({
            "h": err.h, "dofs": err.dofs, "l2_err": err.l2,
            "h1_err": err.h1, "stress_err": err.stress,
            "solve_seconds": 0.0 if config.deterministic else seconds,
        })
    config.out.mkdir(parents=True, exist_ok=True)
    path = config.out / ("converge_%s.csv" % config.problem)
    write_convergence_csv(path, rows)
    print("wrote %s" % path)
    for row in rows:
        print("  h=%-12g dofs=%-8d l2=%.4e h1=%.4e stress=%.4e"
              % (row["h"], row["dofs"], row["l2_err"], row["h1_err"],
                 row["stress_err"]))
    return rows


def cook_problem(mu: float, lam: float, quad_deg: int = 4) -> ProblemSpec:
    """Cook panel data: clamped left edge, (0, 1/16) traction on the right."""

    def zero(x):
        return np.zeros_like(x)

    def load(x):
        g = np.zeros_like(x)
        g[..., 1] = 1.0 / 16.0
        return g

    return ProblemSpec(mu=mu, lam=lam, body_force=None, dirichlet_data=zero,
                       neumann_data={REGION_LOAD: load, REGION_FREE: zero},
                       cell_deg=quad_deg, facet_deg=quad_deg)


def probe_vertex(mesh: Mesh, point=COOK_PROBE) -> int:
    hits = np.nonzero(np.all(np.abs(mesh.vertices - point) < 1e-6, axis=1))[0]
    if hits.size != 1:
        raise ConfigurationError("probe vertex %s not in mesh" % point)
    return int(hits[0])


def run_cook(config: RunConfig) -> dict[str, list[dict]]:
    """Run the Cook panel cases; CSV of probe displacements plus VTK fields."""
    levels = config.levels or [0, 1, 2, 3, 4, 5]
    if config.cook_case == "custom":
        cases = {"custom": (config.mu, config.lam)}
    else:
        names = ([config.cook_case] if config.cook_case
                 else list(COOK_CASES))
        cases = {}
        for name in names:
            young, poisson = COOK_CASES[name]
            cases[name] = lame_from_young_poisson(young, poisson)

    config.out.mkdir(parents=True, exist_ok=True)
    results: dict[str, list[dict]] = {}
    for name, (mu, lam) in cases.items():
        spec = cook_problem(mu, lam, config.quad_deg)
        rows = []
        last = None
        for level in levels:
            mesh = build_cook_mesh(level)
            u_h, report, seconds = _solve_problem(mesh, spec, config.tol)
            u2 = float(u_h.u0[probe_vertex(mesh), 1])
            rows.append({"level": level, "dofs": u_h.dofmap.total, "u2": u2,
                         "solve_seconds": 0.0 if config.deterministic else seconds})
            last = (mesh, u_h)
        path = config.out / ("cook_%s.csv" % name)
        lines = ["level,dofs,u2,solve_seconds"]
        for r in rows:
            lines.append(",".join([str(r["level"]), str(r["dofs"]),
                                   _fmt(r["u2"]), _fmt(r["solve_seconds"])]))
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
        mesh, u_h = last
        write_vtk(mesh, {"displacement": u_h.u0},
                  {"von_mises": von_mises(u_h, mu, lam)},
                  config.out / ("cook_%s.vtk" % name))
        print("wrote %s (+.vtk); u2(48,52) per level: %s"
              % (path, " ".join("%.6f" % r["u2"] for r in rows)))
        results[name] = rows
    return results


def run_export(config: RunConfig) -> Path:
    """Solve one configuration and export VTK fields plus the mesh dump."""
    config.out.mkdir(parents=True, exist_ok=True)
    if config.problem == "cook":
        level = (config.levels or [0])[0]
        mesh = build_cook_mesh(level)
        mu, lam = config.mu, config.lam
        spec = cook_problem(mu, lam, config.quad_deg)
        u_h, _, _ = _solve_problem(mesh, spec, config.tol)
    else:
        gen = _converge_cases(RunConfig(
            command="export", problem=config.problem, mu=config.mu,
            lam=config.lam, levels=config.levels[:1],
            h_list=config.h_list[:1], quad_deg=config.quad_deg))
        mesh, exact = next(iter(gen))
        spec = ProblemSpec(mu=config.mu, lam=config.lam,
                           body_force=exact.body_force,
                           dirichlet_data=exact.u, exact=exact,
                           cell_deg=config.quad_deg, facet_deg=config.quad_deg)
        u_h, _, _ = _solve_problem(mesh, spec, config.tol)

    cell_fields = {}
    if mesh.dim == 2:
        from .weakops import element_kernels

        k = element_kernels(mesh)
        gw = k.apply_gradient(u_h)
        divw = k.apply_divergence(u_h)
        eps = 0.5 * (gw + np.swapaxes(gw, -1, -2))
        sigma = 2.0 * spec.mu * eps \
            + spec.lam * divw[:, None, None] * np.eye(2)
        full = np.zeros((mesh.n_cells, 3, 3))
        full[:, :2, :2] = sigma
        full[:, 2, 2] = spec.lam * divw
        cell_fields["stress"] = full
        cell_fields["von_mises"] = von_mises(u_h, spec.mu, spec.lam)
    path = config.out / ("%s.vtk" % config.problem)
    write_vtk(mesh, {"displacement": u_h.u0}, cell_fields, path)
    dump_mesh(mesh, config.out / ("%s_mesh.txt" % config.problem))
    print("wrote %s" % path)
    return path


def _parse_levels(text: str, parser: argparse.ArgumentParser) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            levels = list(range(int(a), int(b) + 1))
        else:
            levels = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        parser.error("cannot parse --levels %r" % text)
    if not levels:
        parser.error("--levels gives an empty range")
    return levels


def _parse_h_list(text: str, parser: argparse.ArgumentParser) -> list[float]:
    try:
        hs = [float(Fraction(p)) for p in text.split(",") if p.strip()]
    except (ValueError, ZeroDivisionError):
        parser.error("cannot parse --h-list %r" % text)
    if not hs:
        parser.error("--h-list is empty")
    if any(h <= 0 for h in hs):
        parser.error("--h-list entries must be positive")
    return hs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egelastic",
        description="Locking-free enriched Galerkin elasticity benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (("converge", "mesh-refinement convergence study"),
                       ("cook", "Cook panel benchmark"),
                       ("export", "solve once and export VTK fields")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--problem", default="cook" if name == "cook" else None,
                       choices=["square2d", "cube3d", "lshape", "cook"])
        p.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="Lame lambda (with --mu)")
        p.add_argument("--mu", type=float, default=None,
                       help="Lame mu (with --lambda)")
        p.add_argument("--young", type=float, default=None,
                       help="Young's modulus (with --poisson)")
        p.add_argument("--poisson", type=float, default=None,
                       help="Poisson ratio (with --young)")
        p.add_argument("--levels", default=None,
                       help="refinement levels, e.g. 2..5 or 0,2,4")
        p.add_argument("--h-list", default=None,
                       help="mesh sizes, e.g. 1/8,1/16,1/32")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL,
                       help="solver relative-residual tolerance")
        p.add_argument("--quad-deg", type=int, default=4,
                       help="quadrature degree for loads and errors")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--deterministic", action="store_true",
                       help="byte-stable outputs (timings written as 0)")
        if name == "cook":
            p.add_argument("--case", default=None,
                           choices=list(COOK_CASES),
                           help="run a single material case")
    return parser


def config_from_args(args, parser: argparse.ArgumentParser) -> RunConfig:
    has_lame = args.lam is not None or args.mu is not None
    has_young = args.young is not None or args.poisson is not None
    if has_lame and has_young:
        parser.error("give either --lambda/--mu or --young/--poisson, not both")
    if has_young:
        if args.young is None or args.poisson is None:
            parser.error("--young and --poisson must be given together")
        mu, lam = lame_from_young_poisson(args.young, args.poisson)
    elif has_lame:
        if args.lam is None or args.mu is None:
            parser.error("--lambda and --mu must be given together")
        mu, lam = args.mu, args.lam
    else:
        mu, lam = 1.0, 1.0

    levels = _parse_levels(args.levels, parser) if args.levels else []
    h_list = _parse_h_list(args.h_list, parser) if args.h_list else []
    problem = args.problem
    if args.command == "cook":
        problem = "cook"
    elif problem is None:
        parser.error("--problem is required")
    if args.command == "converge" and problem == "cook":
        parser.error("the cook panel has no exact solution; use the cook command")

    cook_case = getattr(args, "case", None)
    if args.command == "cook" and (has_lame or has_young):
        cook_case = "custom"
    return RunConfig(
        command=args.command, problem=problem, mu=mu, lam=lam,
        levels=levels, h_list=h_list, tol=args.tol, quad_deg=args.quad_deg,
        out=Path(args.out), deterministic=args.deterministic,
        cook_case=cook_case)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = config_from_args(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if config.command == "converge":
            run_converge(config)
        elif config.command == "cook":
            run_cook(config)
        else:
            run_export(config)
    except SolverError as exc:
        print("solver failure: %s (best residual %.3e)"
              % (exc, exc.best_residual), file=sys.stderr)
        return 1
    except (ConfigurationError, NotImplementedError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
