"""Command-line driver.

Subcommands::

    varswe mesh       --level L [--optimize] --out DIR
    varswe run        [--config FILE] [--case NAME] [--level L] [--scheme S] [--dt DT] [--days N] --out DIR
    varswe operators  [--levels 3 4 5 6] [--which grad div curl] --out DIR
    varswe compare    [--case geostrophic|mountain] [--level L] [--dt DT] [--days N] --out DIR

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 file-system error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import kernels
from .diagnostics import (DiagnosticsSeries, UndefinedNormError,
                          reconstruct_cell_velocity, write_diagnostics_csv)
from .dynamics import StateError
from .io import (ConfigError, OutputConfig, RunConfig, load_config, write_checkpoint,
                 write_mesh_summary, write_vtk)
from .mesh import MeshResourceError, build_mesh
from .operators import curl_num, operator_errors
from .testcases import DAY, CaseSpec, initialize
from .timeint import SCHEMES, IntegratorConfig, NumericalError, step

log = logging.getLogger("varswe")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

__all__ = ["main", "run_simulation", "run_operator_convergence", "run_scheme_comparison",
           "reconstruct_cell_velocity", "RunResult"]


# --------------------------------------------------------------------------
# simulation driver


@dataclass
class RunResult:
    status: int
    diagnostics: DiagnosticsSeries
    state: object
    steps: int
    max_fp_iterations: int
    paths: dict
    error: str | None = None


def dump_fields(path, mesh, state, static, title):
    u, speed = reconstruct_cell_velocity(mesh, state.V)
    write_vtk(path, mesh,
              cell_data={"D": state.D, "B": static.B, "surface": state.D + static.B,
                         "velocity": u, "speed": speed},
              point_data={"vorticity": curl_num(mesh, state.V)},
              title=title)


def _snapshot_steps(cfg):
    dt, n = cfg.integrator.dt, cfg.n_steps
    days = cfg.output.dump_days
    if days is None:
        days = cfg.case.snapshot_days or (0.0, cfg.days)
    steps = {min(n, int(round(d * DAY / dt))) for d in days}
    if cfg.output.dump_every:
        steps |= set(range(0, n + 1, cfg.output.dump_every))
    return steps


def run_simulation(cfg: RunConfig, mesh=None, write_files=True):
    """Integrate one case and write diagnostics, field dumps and a final checkpoint.

    Numerical failures do not raise: the returned :class:`RunResult` carries
    exit status 2, the last good state is checkpointed and an ``error.json``
    report is written.
    """
    out = cfg.output.directory
    if write_files:
        os.makedirs(out, exist_ok=True)
    mesh = mesh or build_mesh(cfg.level, cfg.case.radius_m, optimize=cfg.optimize_mesh)
    state, static = initialize(mesh, cfg.case)
    diag = DiagnosticsSeries(mesh, static, compare_to_initial=cfg.compare_to_initial)
    diag.record(state)
    n = cfg.n_steps
    dumps = _snapshot_steps(cfg)
    paths = {"diagnostics": os.path.join(out, "diagnostics.csv"),
             "checkpoint": os.path.join(out, "checkpoint.bin"), "fields": []}

    def dump(st):
        p = os.path.join(out, f"fields_{st.step:07d}.vtk")
        dump_fields(p, mesh, st, static,
                    f"{cfg.case.case} level {cfg.level} step {st.step} t={st.time:.1f}s")
        paths["fields"].append(p)

    if write_files and 0 in dumps:
        dump(state)
    log.info("%s: level %d, %s, dt=%g s, %d steps", cfg.case.case, cfg.level,
             cfg.integrator.scheme, cfg.integrator.dt, n)
    max_it, err, status = 0, None, EXIT_OK
    t0 = time.perf_counter()
    every = cfg.output.diagnostics_every
    for k in range(1, n + 1):
        try:
            new, info = step(mesh, state, static, cfg.integrator)
        except (NumericalError, StateError) as exc:
            err, status = f"{type(exc).__name__}: {exc}", EXIT_NUMERICAL
            log.error("step %d failed: %s", k, exc)
            break
        state = new
        max_it = max(max_it, info.iterations)
        if k % every == 0 or k == n:
            diag.record(state)
        if write_files:
            if k in dumps:
                dump(state)
            if cfg.output.checkpoint_every and k % cfg.output.checkpoint_every == 0:
                write_checkpoint(paths["checkpoint"], mesh, state)
        if k % 1000 == 0:
            log.info("step %d/%d, %.1f s elapsed", k, n, time.perf_counter() - t0)
    if write_files:
        diag.write_csv(paths["diagnostics"])
        write_checkpoint(paths["checkpoint"], mesh, state)
        if err is not None:
            report = {"status": "numerical_failure", "error": err,
                      "last_good_step": state.step, "last_good_time_s": state.time,
                      "checkpoint": paths["checkpoint"]}
            paths["error"] = os.path.join(out, "error.json")
            with open(paths["error"], "w") as fh:
                json.dump(report, fh, indent=2)
    return RunResult(status, diag, state, state.step, max_it, paths, err)


# --------------------------------------------------------------------------
# operator convergence


def run_operator_convergence(levels, which, optimize=False):
    """Rows ``(level, h_max, error, observed_order)`` and the finest pointwise error.

    ``h_max`` is the longest primal edge on the unit sphere; the order between
    consecutive levels is ``log2(e_prev / e)``.
    """
    levels = list(levels)
    if levels != sorted(levels):
        raise ValueError("levels must be ascending")
    rows, field_err, prev, finest = [], None, None, None
    for L in levels:
        mesh = build_mesh(L, optimize=optimize)
        err, pointwise = operator_errors(mesh, which)
        h = float(mesh.edge_lengths.max() / mesh.radius_m)
        order = math.nan if prev is None else math.log2(prev / err)
        rows.append({"level": L, "h_max": h, "error": err, "observed_order": order})
        prev, field_err, finest = err, pointwise, mesh
    return rows, field_err, finest


def write_convergence_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "h_max", "error", "observed_order"])
        for r in rows:
            w.writerow([r["level"], repr(r["h_max"]), repr(r["error"]), repr(r["observed_order"])])


def read_convergence_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{"level": int(r["level"]), "h_max": float(r["h_max"]), "error": float(r["error"]),
             "observed_order": float(r["observed_order"])} for r in rows]


# --------------------------------------------------------------------------
# scheme comparison


def energy_slope(series):
    """Least-squares slope of the relative energy error, per day."""
    t = series.column("time_s") / DAY
    return float(np.polyfit(t, series.column("energy_rel_err"), 1)[0])


def run_scheme_comparison(case, days, level=5, dt=100.0, out=None, mesh=None, **overrides):
    """Run both integrators with identical settings; returns ``{scheme: RunResult}``."""
    if case not in ("geostrophic", "mountain"):
        raise ValueError(f"scheme comparison supports geostrophic and mountain, not {case!r}")
    mesh = mesh or build_mesh(level)
    results = {}
    for scheme in SCHEMES:
        cfg = RunConfig(case=CaseSpec(case, days=days, dt=dt, **overrides), level=level,
                        integrator=IntegratorConfig(scheme=scheme, dt=dt),
                        output=OutputConfig(directory=os.path.join(out or ".", scheme),
                                            dump_days=()))
        res = run_simulation(cfg, mesh=mesh, write_files=False)
        if res.status != EXIT_OK:
            raise NumericalError(f"{scheme}: {res.error}")
        results[scheme] = res
        if out is not None:
            write_diagnostics_csv(os.path.join(out, f"diagnostics_{scheme}.csv"),
                                  res.diagnostics.records)
    return results


# --------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="varswe", description="Variational shallow-water model on icosahedral meshes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("mesh", help="build a mesh, write VTK and a text summary")
    m.add_argument("--level", type=int, default=5)
    m.add_argument("--optimize", action="store_true",
                   help="move vertices to reduce primal/dual edge midpoint offsets")
    m.add_argument("--out", default="out")

    r = sub.add_parser("run", help="run a test case")
    r.add_argument("--config")
    r.add_argument("--case")
    r.add_argument("--level", type=int)
    r.add_argument("--scheme")
    r.add_argument("--dt", type=float)
    r.add_argument("--days", type=float)
    r.add_argument("--out")

    o = sub.add_parser("operators", help="operator convergence study")
    o.add_argument("--levels", type=int, nargs="+", default=[3, 4, 5, 6])
    o.add_argument("--which", nargs="+", choices=["grad", "div", "curl"],
                   default=["grad", "div", "curl"])
    o.add_argument("--optimize", action="store_true")
    o.add_argument("--out", default="out")

    c = sub.add_parser("compare", help="compare Cayley and Crank-Nicolson energy behaviour")
    c.add_argument("--config")
    c.add_argument("--case", default="mountain")
    c.add_argument("--level", type=int, default=5)
    c.add_argument("--dt", type=float, default=100.0)
    c.add_argument("--days", type=float, default=15.0)
    c.add_argument("--out", default="out")
    return p


def _run_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    case, integ, output = cfg.case, cfg.integrator, cfg.output
    try:
        if args.case:
            case = CaseSpec(args.case, **{k: v for k, v in asdict(case).items() if k != "case"})
        if args.days is not None:
            case = replace(case, days=args.days)
        if args.dt is not None:
            integ = replace(integ, dt=args.dt)
            case = replace(case, dt=args.dt)
        if args.scheme:
            integ = replace(integ, scheme=args.scheme)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.out:
        output = replace(output, directory=args.out)
    level = cfg.level if args.level is None else args.level
    return replace(cfg, case=case, integrator=integ, output=output, level=level)


def _cmd_mesh(args):
    mesh = build_mesh(args.level, optimize=args.optimize)
    os.makedirs(args.out, exist_ok=True)
    write_vtk(os.path.join(args.out, f"mesh_L{args.level}.vtk"), mesh,
              cell_data={"edge_length_max": mesh.edge_lengths[mesh.cell_edges].max(axis=1)},
              point_data={"dual_area": mesh.dual_areas})
    write_mesh_summary(os.path.join(args.out, f"mesh_L{args.level}.txt"), mesh)
    print(mesh.summary())
    return EXIT_OK


def _cmd_run(args):
    cfg = _run_config(args)
    res = run_simulation(cfg)
    last = res.diagnostics.records[-1]
    print(f"{cfg.case.case}: {res.steps} steps, max fixed-point iterations {res.max_fp_iterations}, "
          f"mass err {last.mass_rel_err:.3e}, energy err {last.energy_rel_err:.3e}")
    if res.error:
        print(res.error, file=sys.stderr)
    return res.status


def _cmd_operators(args):
    os.makedirs(args.out, exist_ok=True)
    for which in args.which:
        rows, pointwise, mesh = run_operator_convergence(args.levels, which, args.optimize)
        write_convergence_csv(os.path.join(args.out, f"convergence_{which}.csv"), rows)
        for r in rows:
            print(f"{which:5s} L{r['level']}  h_max={r['h_max']:.4e}  err={r['error']:.4e}  "
                  f"order={r['observed_order']:.3f}")
        if which == "div":
            L = args.levels[-1]
            with open(os.path.join(args.out, f"div_error_L{L}.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["cell_id", "abs_error"])
                w.writerows([k, repr(float(v))] for k, v in enumerate(pointwise))
            write_vtk(os.path.join(args.out, f"div_error_L{L}.vtk"), mesh,
                      cell_data={"div_abs_error": pointwise})
    return EXIT_OK


def _cmd_compare(args):
    overrides = {}
    if args.config:
        overrides = {k: v for k, v in asdict(load_config(args.config).case).items()
                     if k not in ("case", "days", "dt", "extra")}
    os.makedirs(args.out, exist_ok=True)
    try:
        results = run_scheme_comparison(args.case, args.days, args.level, args.dt, args.out,
                                        **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for scheme, res in results.items():
        print(f"{scheme:15s} energy-error slope {energy_slope(res.diagnostics):+.3e} /day, "
              f"max fixed-point iterations {res.max_fp_iterations}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", kernels.BACKEND)
    handler = {"mesh": _cmd_mesh, "run": _cmd_run, "operators": _cmd_operators,
               "compare": _cmd_compare}[args.command]
    try:
        return handler(args)
    except (NumericalError, StateError, UndefinedNormError) as exc:
        print(f"varswe: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, MeshResourceError, ValueError) as exc:
        print(f"varswe: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"varswe: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
