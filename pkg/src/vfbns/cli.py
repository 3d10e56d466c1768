"""Command-line driver.

Subcommands:
    run         one simulation from a config file
    sweep-eps   Mach/Froude sweep (axis from --eps or [experiment] eps_list)
    sweep-mesh  grid-refinement study (axis from --mesh or n_list)
    analyze     re-render figures and gnuplot column files from a run directory

Exit status: 0 all verdicts pass, 1 any verdict fails, 2 runtime abort,
64 usage error.  Outputs per run directory: run.csv (fixed column order,
17 significant digits), summary.json, config.cfg echo, and PNG figures;
sweeps write one subdirectory per axis value plus a top-level summary.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import plots
from .config import Config, ConfigError, parse_config
from .energetics import CSV_COLUMNS
from .experiments import RunReport, SweepReport, epsilon_sweep, mesh_refinement, run_single

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ABORT = 2
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="vfbns",
                     description="1-D vacuum free-boundary gas column lab")
    sub = parser.add_subparsers(dest="command")

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--overwrite", action="store_true",
                       help="allow writing into a non-empty directory")

    p_run = sub.add_parser("run", help="single simulation")
    common(p_run)

    p_eps = sub.add_parser("sweep-eps", help="Mach/Froude sweep")
    common(p_eps)
    p_eps.add_argument("--eps", help="comma-separated decreasing values")

    p_mesh = sub.add_parser("sweep-mesh", help="mesh refinement study")
    common(p_mesh)
    p_mesh.add_argument("--mesh", help="comma-separated cell counts")

    p_an = sub.add_parser("analyze", help="post-process a run directory")
    p_an.add_argument("rundir", help="directory containing run.csv")
    p_an.add_argument("--out", default=None,
                      help="output directory (default: alongside run.csv)")
    return parser


def _prepare_dir(path: Path, overwrite: bool):
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise FileExistsError(
            f"output directory {path} is not empty (use --overwrite)")
    path.mkdir(parents=True, exist_ok=True)


def _write_csv(records, path: Path):
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(f"{x:.17g}" for x in rec.row()) + "\n")


def _write_json(payload: dict, path: Path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(root: Path, files) -> list:
    out = []
    for f in files:
        out.append((str(f.relative_to(root)), f.stat().st_size))
    return out


def write_outputs(report, outdir, overwrite: bool = False) -> list:
    """Persist a run or sweep report; returns [(relative path, bytes)]."""
    root = Path(outdir)
    _prepare_dir(root, overwrite)
    written = []

    if isinstance(report, RunReport):
        csv_path = root / "run.csv"
        _write_csv(report.records, csv_path)
        written.append(csv_path)
        cfg_path = root / "config.cfg"
        cfg_path.write_text(report.config.to_text())
        written.append(cfg_path)
        sum_path = root / "summary.json"
        _write_json(report.summary_dict(), sum_path)
        written.append(sum_path)
        if report.records:
            fig_path = root / "run.png"
            plots.render_run(report.records, fig_path)
            written.append(fig_path)
    elif isinstance(report, SweepReport):
        for point in report.points:
            sub = root / f"{point.axis_value:g}"
            sub.mkdir(parents=True, exist_ok=True)
            _write_csv(point.report.records, sub / "run.csv")
            written.append(sub / "run.csv")
            (sub / "config.cfg").write_text(point.report.config.to_text())
            written.append(sub / "config.cfg")
            _write_json(point.report.summary_dict(), sub / "summary.json")
            written.append(sub / "summary.json")
        sum_path = root / "summary.json"
        _write_json(report.summary_dict(), sum_path)
        written.append(sum_path)
        fig_path = root / "sweep.png"
        if report.axis == "epsilon":
            plots.render_eps_sweep([p.axis_value for p in report.points],
                                   [p.metrics for p in report.points],
                                   report.slope, fig_path)
            written.append(fig_path)
        elif not report.degraded:
            diffs = [p.metrics["diff_to_next"] for p in report.points[:-1]]
            plots.render_mesh_sweep([p.axis_value for p in report.points],
                                    diffs, report.slope, fig_path)
            written.append(fig_path)
    else:
        raise TypeError(f"cannot persist report of type {type(report)!r}")
    return _manifest(root, written)


def _print_verdicts(verdicts, prefix=""):
    for name, v in verdicts.items():
        print(prefix + v.line(name))


def _finish(report, outdir, overwrite) -> int:
    manifest = write_outputs(report, outdir, overwrite)
    for rel, size in manifest:
        print(f"wrote {rel} ({size} bytes)")
    if isinstance(report, RunReport):
        _print_verdicts(report.verdicts)
        if report.aborted:
            print(f"ABORT at t={report.abort_time:g}: {report.abort_reason}")
            return EXIT_ABORT
        return EXIT_OK if report.all_passed else EXIT_FAIL
    _print_verdicts(report.verdicts)
    if report.degraded:
        print("ABORT: sweep degraded (member run failed)")
        return EXIT_ABORT
    if np.isfinite(report.slope):
        print(f"fitted exponent: {report.slope:.4f} (residual {report.residual:.2e})")
    return EXIT_OK if report.all_passed else EXIT_FAIL


def _load_config(path: str) -> Config:
    return parse_config(Path(path).read_text())


def _parse_list(raw, cast):
    return [cast(s) for s in raw.split(",") if s.strip()]


def _analyze(args) -> int:
    rundir = Path(args.rundir)
    csv_path = rundir / "run.csv"
    if not csv_path.exists():
        print(f"no run.csv under {rundir}", file=sys.stderr)
        return EXIT_FAIL
    table = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
    table = np.atleast_2d(table)
    out = Path(args.out) if args.out else rundir / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    dat = out / "run.dat"
    with open(dat, "w") as fh:
        fh.write("# " + " ".join(CSV_COLUMNS) + "\n")
        for row in table:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
    png = out / "run.png"
    plots.render_csv(table, list(CSV_COLUMNS), png)
    for f in (dat, png):
        print(f"wrote {f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "run":
            report = run_single(_load_config(args.config))
            return _finish(report, args.out, args.overwrite)
        if args.command == "sweep-eps":
            cfg = _load_config(args.config)
            eps = _parse_list(args.eps, float) if args.eps else list(cfg.eps_list)
            if not eps:
                raise _UsageError("sweep-eps needs --eps or [experiment] eps_list")
            report = epsilon_sweep(cfg, eps)
            return _finish(report, args.out, args.overwrite)
        if args.command == "sweep-mesh":
            cfg = _load_config(args.config)
            ns = _parse_list(args.mesh, int) if args.mesh else list(cfg.n_list)
            if not ns:
                raise _UsageError("sweep-mesh needs --mesh or [experiment] n_list")
            report = mesh_refinement(cfg, ns)
            return _finish(report, args.out, args.overwrite)
        if args.command == "analyze":
            return _analyze(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except FileExistsError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
