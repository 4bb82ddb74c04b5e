"""Command-line front end: ``hetnetlab {sweep,meancell,ingest,compare,snapshot}``.

Settings come from built-in defaults, then ``--config FILE``, then flags.
Exit codes: 0 ok, 2 configuration error, 3 convergence warning, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import harness
from .cellmodel import assign_cells, write_cell_csv, write_pixel_csv
from .geometry import sample_network, save_snapshot, write_station_csv
from .harness import EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO, EXIT_OK, ConfigError, MeasurementError

logger = logging.getLogger("hetnetlab")


def _common(p):
    p.add_argument("--config", help="YAML scenario file")
    p.add_argument("--out", help="output directory (default: output_dir of the config)")
    p.add_argument("--sim-radius", type=float, help="generation disc radius, km")
    p.add_argument("--obs-radius", type=float, help="observation disc radius, km")
    p.add_argument("--grid-step", type=float, help="pixel size, km")
    p.add_argument("--pilot-eps", type=float, help="always-on power share in interference")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="hetnetlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="typical-cell and mean-cell curves over a traffic sweep")
    _common(p)
    p.add_argument("--rho", type=float, nargs="+", metavar="KBPS", help="mean traffic per cell values")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, help="base seed; replication k uses seed + k")
    p.add_argument("--tol", type=float, help="fixed-point tolerance on loads")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--workers", type=int, default=1, help="processes for replications")
    p.add_argument("--no-meancell", action="store_true", help="skip the mean-cell curves")
    p.add_argument("--gnuplot", action="store_true", help="also write .dat files")

    p = sub.add_parser("meancell", help="mean-cell curves only")
    _common(p)
    p.add_argument("--rho", type=float, nargs="+", metavar="KBPS")
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--seed", type=int, help="Monte Carlo seed")
    p.add_argument("--network", choices=["equivalent", "heterogeneous"])
    p.add_argument("--tail-correction", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--gnuplot", action="store_true")

    p = sub.add_parser("ingest", help="validate and aggregate a measurement file")
    p.add_argument("measurements", help="CSV with header hour,tier,traffic_kbps,load,users")
    p.add_argument("--config", help="YAML scenario file (for the tier labels)")
    p.add_argument("--out", help="write per-hour aggregates to this CSV")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("compare", help="residuals of measurements against model curves")
    p.add_argument("model", help="typical_cell.csv or mean_cell.csv from a previous run")
    p.add_argument("measurements")
    p.add_argument("--config", help="YAML scenario file (for the tier labels)")
    p.add_argument("--out", default="comparison.csv", help="per-point residuals CSV")
    p.add_argument("--summary", help="summary CSV (default: <out>_summary.csv)")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("snapshot", help="dump one network realization")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=None, metavar="KBPS",
                   help="mean traffic per cell for the cell table (default: first sweep value)")
    return parser


def _config(args):
    config = harness.load_config(args.config) if args.config else harness.ScenarioConfig()
    changes = {}
    for flag, key in [
        ("sim_radius", "geometry_sim_radius"),
        ("obs_radius", "geometry_obs_radius"),
        ("grid_step", "geometry_grid_step"),
        ("pilot_eps", "pilot_eps"),
        ("replications", "replications"),
        ("tol", "solver_tol"),
        ("max_iter", "solver_max_iter"),
        ("mc_samples", "meancell_samples"),
        ("network", "meancell_network"),
        ("tail_correction", "meancell_tail_correction"),
        ("out", "output_dir"),
    ]:
        changes[key] = getattr(args, flag, None)
    if args.command == "sweep":
        changes["base_seed"] = args.seed
    elif args.command == "meancell":
        changes["meancell_seed"] = args.seed
    rho = getattr(args, "rho", None)
    if isinstance(rho, list):
        changes["rho_sweep_kbps"] = rho
    try:
        return harness.override(config, **changes)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_sweep(args):
    config = _config(args)
    result = harness.run_sweep(config, workers=args.workers, meancell=not args.no_meancell)
    paths = harness.write_results(result, config.output_dir, gnuplot=args.gnuplot)
    for name, path in paths.items():
        print(f"{name}: {path}")
    failed = [p.rho_bar_kbps for p in result.points if p.failed]
    if failed:
        print(f"aborted sweep points (kbps): {failed}", file=sys.stderr)
    if not result.converged:
        print("warning: some sweep points did not converge; see solver_diagnostics.csv", file=sys.stderr)
    return result.exit_code


def cmd_meancell(args):
    config = _config(args)
    solutions = harness.run_meancell(config)
    os.makedirs(config.output_dir, exist_ok=True)
    rows = harness.mean_cell_rows(config, config.rho_sweep_kbps, solutions)
    path = os.path.join(config.output_dir, "mean_cell.csv")
    harness.write_csv(path, harness.MEAN_CELL_HEADER, rows)
    print(f"mean_cell: {path}")
    if args.gnuplot:
        dat = os.path.join(config.output_dir, "mean_cell.dat")
        harness.write_gnuplot(dat, harness.MEAN_CELL_HEADER, rows)
        print(f"mean_cell_dat: {dat}")
    return EXIT_OK if all(s.converged for s in solutions) else EXIT_CONVERGENCE


def _labels(args):
    if not args.config:
        return None
    return set(harness.load_config(args.config).tier_labels)


def cmd_ingest(args):
    mset = harness.ingest_measurements(args.measurements, _labels(args))
    print(f"{len(mset.rows)} rows, {len(mset.points)} hourly points")
    for p in mset.points:
        print(f"  hour {p.hour:>4} {p.tier:>6}: traffic {p.traffic_kbps:9.1f} kbps  load {p.load:.3f}"
              f"  users {p.users:.3f}  throughput {p.throughput_kbps:9.1f} kbps")
    if args.out:
        harness.write_measurement_points(mset, args.out)
    return EXIT_OK


def cmd_compare(args):
    model = harness.read_model_csv(args.model)
    mset = harness.ingest_measurements(args.measurements, _labels(args))
    try:
        comparison = harness.compare(model, mset)
    except ValueError as exc:
        raise MeasurementError([(0, str(exc))]) from None
    summary = args.summary or os.path.splitext(args.out)[0] + "_summary.csv"
    harness.write_comparison(comparison, args.out, summary)
    for s in comparison.summary:
        print(f"{s.tier:>6} {s.metric:>16}: median |rel| {s.median_rel_residual:.3f}  "
              f"max |rel| {s.max_rel_residual:.3f}  out of range {s.n_out_of_range}/{s.n_points}")
    return EXIT_OK


def cmd_snapshot(args):
    config = _config(args)
    snap = sample_network(config.geometry, args.seed)
    cells = assign_cells(snap)
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    rho_bar = args.rho if args.rho is not None else config.rho_sweep_kbps[0]
    write_station_csv(snap, os.path.join(out, "stations.csv"))
    write_pixel_csv(snap, cells, os.path.join(out, "pixels.csv"))
    write_cell_csv(snap, cells, config.rho_per_km2(rho_bar), os.path.join(out, "cells.csv"))
    save_snapshot(snap, os.path.join(out, "snapshot.npz"))
    print(f"{snap.n_stations} stations written to {out}")
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "meancell": cmd_meancell,
    "ingest": cmd_ingest,
    "compare": cmd_compare,
    "snapshot": cmd_snapshot,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeasurementError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
