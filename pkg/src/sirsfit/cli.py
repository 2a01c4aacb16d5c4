"""Command-line front end: ``sirsfit <subcommand> [flags]``.

Exit codes: 0 success, 1 numerical failure, 2 input error, 3 no convergence
(artifacts are still written).
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, format_config, load_config_file, params_of, resolve
from .data.gridfit import fit_field, gridfit
from .data.io import (
    DataError,
    atomic_write_text,
    fmt,
    load_incidence_csv,
    load_meteo_csv,
    load_spatial_csv,
    write_field,
)
from .data.lagcorr import best_lags, lagged_correlations
from .grid import Grid
from .ode import SdeConfig, beta_ansatz, fit_constant_params, model_grid, ode_solve, sde_ensemble
from .optimize import fit_ode_time_varying, fit_pde
from .pde import SolverError
from .stability import analyze_equilibrium, mode_report, overall_verdict, stability_sweep, sweep_csv

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2, 3
COMMANDS = ("fit-pde", "fit-ode", "simulate-sde", "stability", "gridfit", "correlate")
LOW_OMEGA = 1e-3


class Run:
    """Output directory bookkeeping for one subcommand."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.outputs: list[str] = []
        self.warnings: list[str] = []
        self.notes: dict = {}

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out_dir / name

    def write(self, name: str, text: str) -> None:
        atomic_write_text(self.path(name), text)

    def warn(self, message: str) -> None:
        self.warnings.append(message)
        print(f"warning: {message}", file=sys.stderr)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def pde_grid(cfg: dict) -> Grid:
    return Grid(nx=cfg["nx"], ny=cfg["ny"], nt=cfg["nt"], T=cfg["T"], a=cfg["a"], b=cfg["b"])


# ------------------------------------------------------------------ commands

def cmd_gridfit(cfg: dict, run: Run) -> int:
    slices = load_spatial_csv(cfg["spatial"])
    grid = pde_grid(cfg)
    x1, x2 = grid.mesh()
    for s in slices:
        surface = gridfit(s, grid, cfg["stiffness"])
        rows = zip(x1.ravel(), x2.ravel(), surface.ravel())
        run.write(f"gridfit_{s.label:g}.csv", csv_text(("x1", "x2", "value"), rows))
    write_field(run.path("data_y2.field"), fit_field(slices, grid, cfg["stiffness"]), grid)
    return EXIT_OK


def cmd_fit_pde(cfg: dict, run: Run) -> int:
    slices = load_spatial_csv(cfg["spatial"])
    grid = pde_grid(cfg)
    params = params_of(cfg)
    if params.omega < LOW_OMEGA:
        run.warn(f"omega = {params.omega:g} < {LOW_OMEGA:g}: the fitted beta may exceed 3 in places")
    data = fit_field(slices, grid, cfg["stiffness"])
    y2_0 = data[0] if cfg["y2_0"] is None else cfg["y2_0"]
    init = [cfg["y1_0"], y2_0, cfg["y3_0"]]
    shape = (grid.nt + 1,) if cfg["beta_mode"] == "time" else grid.shape
    beta0 = np.full(shape, cfg["beta0"])
    report = fit_pde(grid, params, data, beta0, init, eps=cfg["eps"], max_iter=cfg["max_iter"])
    beta = np.broadcast_to(report.final_beta[:, None, None], grid.shape) if report.final_beta.ndim == 1 else report.final_beta
    write_field(run.path("beta.field"), beta, grid)
    write_field(run.path("y2.field"), report.final_solution.y2, grid)
    write_field(run.path("data_y2.field"), data, grid)
    report.write_trace(run.path("fit_trace.csv"))
    x1, x2 = grid.mesh()
    labels = np.array([s.label for s in slices])
    for label, t in zip(labels, labels - labels[0]):
        n = int(np.argmin(np.abs(grid.t - t)))
        rows = zip(x1.ravel(), x2.ravel(), data[n].ravel(), report.final_solution.y2[n].ravel(), beta[n].ravel())
        run.write(f"slice_{label:g}.csv", csv_text(("x1", "x2", "data_y2", "y2", "beta"), rows))
    run.notes.update(iterations=len(report.iterations) - 1, J0=report.J[0], J=report.final_J,
                     stop_reason=report.stop_reason.value, beta_min=float(beta.min()), beta_max=float(beta.max()))
    print(f"fit-pde: {len(report.iterations) - 1} iterations, J {report.J[0]:.6g} -> {report.final_J:.6g}, "
          f"{report.stop_reason.value}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_fit_ode(cfg: dict, run: Run) -> int:
    inc = load_incidence_csv(cfg["incidence"])
    params = params_of(cfg)
    y2_0 = float(inc.cases[0]) if cfg["y2_0"] is None else cfg["y2_0"]
    status = EXIT_OK
    t_fine = model_grid(inc.t, cfg["substeps"])
    if cfg["ode_fit"] in ("constant", "both"):
        free = tuple(n.strip() for n in cfg["free"].split(",") if n.strip())
        fit = fit_constant_params(inc.t, inc.cases, free, params, cfg["beta"], [cfg["y1_0"], y2_0, cfg["y3_0"]],
                                  substeps=cfg["substeps"])
        vals = {"beta": cfg["beta"], "gamma": params.gamma, "y3_0": cfg["y3_0"], **fit.values}
        rows = [(k, float(v)) for k, v in vals.items()] + [("residual", fit.residual)]
        run.write("constant_fit.csv", csv_text(("name", "value"), rows))
        Y = ode_solve(params.replace(gamma=vals["gamma"]), vals["beta"], [cfg["y1_0"], y2_0, vals["y3_0"]], t_fine)
        data_fine = np.interp(t_fine, inc.t, inc.cases)
        run.write("constant_trajectory.csv",
                  csv_text(("t", "data", "y1", "y2", "y3"), zip(t_fine, data_fine, Y[:, 0], Y[:, 1], Y[:, 2])))
        run.notes["constant_fit"] = {**{k: float(v) for k, v in vals.items()}, "residual": fit.residual,
                                     "success": fit.success, "degenerate": fit.degenerate}
        print("fit-ode constant: " + ", ".join(f"{k} = {float(v):.6g}" for k, v in vals.items()))
        if not fit.success:
            status = EXIT_NOT_CONVERGED
    if cfg["ode_fit"] in ("time-varying", "both"):
        data_fine = np.interp(t_fine, inc.t, inc.cases)
        init = [cfg["y1_0"], y2_0, cfg["y3_0"]]
        report = fit_ode_time_varying(params, data_fine, cfg["beta0"], init, t_fine, eps=cfg["eps"],
                                      max_iter=cfg["max_iter"])
        y = report.trajectory
        b_ans = beta_ansatz(np.maximum(data_fine, np.finfo(float).tiny), t_fine, params, cfg["y_over_y1"])
        clipped = np.clip(b_ans, params.beta_min, params.beta_max)
        if np.any(clipped != b_ans):
            run.warn(f"{int(np.sum(clipped != b_ans))} ansatz beta values clipped into "
                     f"[{params.beta_min:g}, {params.beta_max:g}]")
        y2_ans = ode_solve(params, clipped, init, t_fine)[:, 1]
        gap = float(np.linalg.norm(y2_ans - y[:, 1]) / np.linalg.norm(y[:, 1]))
        rows = zip(t_fine, data_fine, report.final_beta, y[:, 0], y[:, 1], y[:, 2], b_ans, y2_ans)
        run.write("time_varying.csv",
                  csv_text(("t", "data", "beta", "y1", "y2", "y3", "beta_ansatz", "y2_ansatz"), rows))
        report.write_trace(run.path("fit_trace.csv"))
        run.notes["time_varying"] = {"iterations": len(report.iterations) - 1, "J0": report.J[0],
                                     "J": report.final_J, "stop_reason": report.stop_reason.value,
                                     "ansatz_gap": gap}
        print(f"fit-ode time-varying: J {report.J[0]:.6g} -> {report.final_J:.6g} "
              f"({report.stop_reason.value}); ansatz relative L2 gap {gap:.3g}")
        if not report.converged:
            status = EXIT_NOT_CONVERGED
    return status


def cmd_simulate_sde(cfg: dict, run: Run) -> int:
    params = params_of(cfg)
    y2_0 = cfg["y2_0"]
    if y2_0 is None:
        y2_0 = float(load_incidence_csv(cfg["incidence"]).cases[0])
    init = [cfg["y1_0"], y2_0, cfg["y3_0"]]
    steps = int(round(params.T / cfg["sde_dt"]))
    t = np.linspace(0.0, params.T, steps + 1)
    config = SdeConfig(rho=cfg["rho"], dt=cfg["sde_dt"], seed=cfg["seed"], n_realizations=cfg["n_realizations"])
    paths = sde_ensemble(params, cfg["beta"], init, t, config)
    det = ode_solve(params, cfg["beta"], init, t)
    mean = paths.mean(axis=0)
    se = paths[:, :, 1].std(axis=0, ddof=1) / np.sqrt(len(paths)) if len(paths) > 1 else np.zeros(len(t))
    rows = zip(t, mean[:, 0], mean[:, 1], mean[:, 2], se, det[:, 1], paths[0, :, 1])
    run.write("sde_summary.csv",
              csv_text(("t", "mean_y1", "mean_y2", "mean_y3", "se_y2", "deterministic_y2", "first_y2"), rows))
    n_refit = min(cfg["refit_realizations"], len(paths))
    if n_refit:
        # re-fit beta and gamma on each realization's monthly samples
        monthly = np.arange(0, steps + 1, int(round(1.0 / cfg["sde_dt"])))
        t_m = t[monthly]
        rows = []
        for k in range(n_refit):
            fit = fit_constant_params(t_m, paths[k, monthly, 1], ("beta", "gamma"), params, cfg["beta"],
                                      [cfg["y1_0"], y2_0, cfg["y3_0"]], substeps=cfg["substeps"])
            rows.append((k, fit.values["beta"], fit.values["gamma"], fit.residual))
        run.write("refit_histogram.csv", csv_text(("realization", "beta", "gamma", "residual"), rows))
    deviation = np.abs(mean[:, 1] - det[:, 1])
    run.notes["max_mean_deviation_in_se"] = float(np.max(np.where(se > 0, deviation / np.where(se > 0, se, 1), 0.0)))
    print(f"simulate-sde: {len(paths)} realizations, {len(t)} time points")
    return EXIT_OK


def cmd_stability(cfg: dict, run: Run) -> int:
    params = params_of(cfg)
    beta, y0 = cfg["beta"], cfg["y0"]
    args = (cfg["n_modes"], cfg["a"], cfg["b"])
    dfe = analyze_equilibrium(params, beta, y0, "disease-free", *args)
    run.write("modes_disease_free.txt", mode_report(dfe))
    r0 = beta / (params.gamma + params.mu)
    lines = [f"r0 = {r0:.6g}", f"disease-free: {overall_verdict(dfe).value}"]
    if r0 > 1:
        endemic = analyze_equilibrium(params, beta, y0, "endemic", *args)
        run.write("modes_endemic.txt", mode_report(endemic))
        rh = all(m.routh_hurwitz for m in endemic)
        lines.append(f"endemic: {overall_verdict(endemic).value} (Routh-Hurwitz on all modes: {'yes' if rh else 'no'})")
        bad = [m.mode for m in endemic if m.routh_hurwitz != (m.max_real < 0)]
        if bad:
            run.warn(f"Routh-Hurwitz and eigenvalues disagree on modes {bad}")
    else:
        lines.append("endemic: does not exist (r0 <= 1)")
    betas = np.linspace(cfg["beta_lo"], cfg["beta_hi"], cfg["beta_steps"])
    rows = stability_sweep(params, {"beta": betas}, y0, *args)
    run.write("sweep.csv", sweep_csv(rows))
    violations = [r["beta"] for r in rows if r["endemic_exists"] and r["endemic_verdict"] != "stable"]
    if violations:
        run.warn(f"endemic state not stable at beta = {violations}")
    text = "\n".join(lines) + "\n"
    run.write("stability.txt", text)
    print(text, end="")
    return EXIT_OK


def cmd_correlate(cfg: dict, run: Run) -> int:
    inc = load_incidence_csv(cfg["incidence"])
    meteo = load_meteo_csv(cfg["meteo"])
    for name, lines in meteo.filled.items():
        run.warn(f"{name}: {len(lines)} missing values forward-filled (lines {lines})")
    table = lagged_correlations(inc, meteo, cfg["max_lag"], shift=cfg["shift"])
    run.write("lag_correlations.csv",
              csv_text(("variable", "lag", "correlation"), ((r.variable, r.lag, r.correlation) for r in table)))
    best = sorted(best_lags(table).values(), key=lambda r: -abs(r.correlation))
    run.write("best_lags.csv",
              csv_text(("variable", "lag", "correlation"), ((r.variable, r.lag, r.correlation) for r in best)))
    for r in best:
        print(f"{r.variable:>14}  lag {r.lag:>2} days  r = {r.correlation:+.4f}")
    return EXIT_OK


HANDLERS = {
    "fit-pde": cmd_fit_pde,
    "fit-ode": cmd_fit_ode,
    "simulate-sde": cmd_simulate_sde,
    "stability": cmd_stability,
    "gridfit": cmd_gridfit,
    "correlate": cmd_correlate,
}


# ---------------------------------------------------------------- plumbing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file or a manifest.json of an earlier run")
    common.add_argument("--out-dir", default=None, help="output directory (default: out/<subcommand>)")
    common.add_argument("--seed", type=int)
    common.add_argument("--grid", nargs=3, type=int, metavar=("NX", "NY", "NT"))
    common.add_argument("--omega", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--stiffness", type=float)
    common.add_argument("--beta-mode", choices=("time", "time-space"))
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    parser = argparse.ArgumentParser(prog="sirsfit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__name__.replace("cmd_", "").replace("_", " "))
    return parser


def flag_overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value
    if args.seed is not None:
        out["seed"] = args.seed
    if args.grid is not None:
        out.update(nx=args.grid[0], ny=args.grid[1], nt=args.grid[2])
    for key in ("omega", "rho", "stiffness"):
        if getattr(args, key) is not None:
            out[key] = getattr(args, key)
    if args.beta_mode is not None:
        out["beta_mode"] = args.beta_mode
    return out


def write_manifest(run: Run, command: str, cfg: dict | None, file_values: dict, overrides: dict,
                   code: int, wall: float, error: str | None) -> None:
    manifest = {
        "command": command,
        "exit_code": code,
        "error": error,
        "config": cfg,
        "config_file_values": file_values,
        "overrides": {k: str(v) for k, v in overrides.items()},
        "seed": None if cfg is None else cfg.get("seed"),
        "versions": {"sirsfit": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": wall,
        "outputs": run.outputs,
        "warnings": run.warnings,
        "results": run.notes,
    }
    atomic_write_text(run.out_dir / "manifest.json", json.dumps(manifest, indent=2, default=str) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    out_dir = Path(args.out_dir) if args.out_dir else Path("out") / command
    run = Run(out_dir)
    cfg, file_values, overrides = None, {}, {}
    start = time.perf_counter()
    error = None
    try:
        overrides = flag_overrides(args)
        if args.config:
            file_values = load_config_file(args.config, command)
        cfg = resolve(command, file_values, overrides)
        out_dir.mkdir(parents=True, exist_ok=True)
        run.write("config.txt", format_config(cfg))
        code = HANDLERS[command](cfg, run)
    except (FileNotFoundError, DataError, ConfigError) as exc:
        code, error = EXIT_INPUT, str(exc)
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        code, error = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    except ValueError as exc:
        code, error = EXIT_INPUT, str(exc)
    if error is not None:
        print(f"sirsfit {command}: error: {error}", file=sys.stderr)
    if code == EXIT_NOT_CONVERGED:
        print(f"sirsfit {command}: did not converge; artifacts written to {out_dir}", file=sys.stderr)
    try:
        write_manifest(run, command, cfg, file_values, overrides, code, time.perf_counter() - start, error)
    except OSError as exc:
        print(f"sirsfit {command}: cannot write manifest: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
