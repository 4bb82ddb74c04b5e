"""Scenario configuration, traffic sweeps, result tables and field comparisons.

A sweep is parameterized by the mean traffic demand per cell ``rho_bar``
(kbps); the spatial density is ``rho = rho_bar * lambda``. Every replication
draws one network (seed ``base_seed + k``) and reuses it across the sweep,
so curves are computed with common random numbers.

Configuration files are YAML::

    schema_version: 1
    geometry:
      sim_radius_km: 4.13
      obs_radius_km: 2.63
      grid_step_km: 0.05
      pathloss_K_per_km: 7117
      pathloss_beta: 3.8
      shadow_sigma_db: 10
      shadow_corr_km: 0.05
      noise_dbm: -96
      tiers:
        - {name: macro, intensity_per_km2: 4.4466, power_dbm: 58.26}
        - {name: micro, intensity_per_km2: 0.1734, power_dbm: 47.42}
    rate: {bandwidth_hz: 5.0e6, efficiency: 0.3}
    pilot_eps: 0.1
    sweep: {rho_bar_kbps: [100, 200, 300], replications: 10, base_seed: 0}
    solver: {tol: 1.0e-4, max_iter: 200, relaxation: 1.0}
    meancell: {samples: 4000, tol: 1.0e-6, seed: 0, tail_correction: false, network: equivalent}
    output_dir: results

Every section and key is optional; missing values take the defaults of
``ScenarioConfig``.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from .cellmodel import assign_cells
from .geometry import GeometryConfig, TierConfig, default_geometry, sample_network
from .loadsolver import FixedPointReport, LoadProblem, solve_fixed_point
from .meancell import MeanCellSolution, sample_typical_user, solve_mean_cell
from .queuemetrics import CellTable, TierAverages, network_averages
from .ratemodel import RateParams
from .units import dbm_to_mw, mw_to_dbm

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ALL = "all"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


class ConfigError(ValueError):
    """Invalid scenario configuration; carries the offending field and file line."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class MeasurementError(ValueError):
    """Malformed measurement file; ``problems`` lists ``(line, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"line {ln}: {msg}" for ln, msg in self.problems))


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-4
    max_iter: int = 200
    relaxation: float = 1.0


@dataclass(frozen=True)
class MeanCellSettings:
    samples: int = 4000
    tol: float = 1e-6
    seed: int = 0
    tail_correction: bool = False
    network: str = "equivalent"


def default_sweep():
    return tuple(float(x) for x in range(100, 1001, 100))


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: GeometryConfig = field(default_factory=default_geometry)
    rate: RateParams = RateParams()
    pilot_eps: float = 0.1
    rho_sweep_kbps: tuple = field(default_factory=default_sweep)
    replications: int = 10
    base_seed: int = 0
    solver: SolverSettings = SolverSettings()
    meancell: MeanCellSettings = MeanCellSettings()
    output_dir: str = "results"

    def __post_init__(self):
        if len(self.rho_sweep_kbps) == 0:
            raise ConfigError("traffic sweep is empty", "sweep.rho_bar_kbps")
        if any(not (x > 0 and math.isfinite(x)) for x in self.rho_sweep_kbps):
            raise ConfigError("sweep values must be finite and > 0", "sweep.rho_bar_kbps")
        if self.replications < 1:
            raise ConfigError("need at least one replication", "sweep.replications")
        if not 0 <= self.pilot_eps <= 1:
            raise ConfigError("must lie in [0, 1]", "pilot_eps")
        if not self.solver.tol > 0 or self.solver.max_iter < 1:
            raise ConfigError("need tol > 0 and max_iter >= 1", "solver")
        if not 0 < self.solver.relaxation <= 1:
            raise ConfigError("must lie in (0, 1]", "solver.relaxation")
        if self.meancell.samples < 1 or not self.meancell.tol > 0:
            raise ConfigError("need samples >= 1 and tol > 0", "meancell")
        if self.meancell.network not in ("equivalent", "heterogeneous"):
            raise ConfigError("must be 'equivalent' or 'heterogeneous'", "meancell.network")

    def rho_per_km2(self, rho_bar_kbps):
        """Spatial traffic density (bit/s/km^2) giving mean cell traffic ``rho_bar_kbps``."""
        return rho_bar_kbps * 1e3 * self.geometry.intensity

    @property
    def tier_labels(self):
        return [t.name or str(j) for j, t in enumerate(self.geometry.tiers, start=1)]


# --- config file -------------------------------------------------------------

_GEOMETRY_KEYS = {
    "sim_radius_km": "sim_radius",
    "obs_radius_km": "obs_radius",
    "grid_step_km": "grid_step",
    "pathloss_K_per_km": "pathloss_K",
    "pathloss_beta": "pathloss_beta",
    "shadow_sigma_db": "shadow_sigma_db",
    "shadow_corr_km": "shadow_corr_km",
}
_TOP_KEYS = {"schema_version", "geometry", "rate", "pilot_eps", "sweep", "solver", "meancell", "output_dir"}


def _line_index(node, path=(), out=None):
    """Map key paths of a composed YAML tree to 1-based line numbers."""
    if out is None:
        out = {}
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            out[path + (key.value,)] = key.start_mark.line + 1
            _line_index(value, path + (key.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, value in enumerate(node.value):
            _line_index(value, path + (i,), out)
    return out


class _Reader:
    """Typed access to the parsed config with line-aware errors."""

    def __init__(self, data, lines):
        self.data = data
        self.lines = lines

    def error(self, path, message):
        name = ".".join(str(p) for p in path)
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        return ConfigError(message, name, line)

    def section(self, path, allowed):
        node = self.get(path)
        if node is None:
            return {}
        if not isinstance(node, dict):
            raise self.error(path, "expected a mapping")
        for key in node:
            if key not in allowed:
                raise self.error(path + (key,), "unknown key")
        return node

    def get(self, path):
        node = self.data
        for p in path:
            if isinstance(node, dict) and p in node:
                node = node[p]
            elif isinstance(node, list) and isinstance(p, int) and p < len(node):
                node = node[p]
            else:
                return None
        return node

    def number(self, path, integer=False):
        value = self.get(path)
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a dot (1e-4) as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(path, f"expected a number, got {value!r}")
        if integer:
            if float(value) != int(value):
                raise self.error(path, f"expected an integer, got {value!r}")
            return int(value)
        return float(value)


def _apply(reader, kwargs, path, key, kind="number"):
    if reader.get(path) is None:
        return
    if kind == "number":
        kwargs[key] = reader.number(path)
    elif kind == "int":
        kwargs[key] = reader.number(path, integer=True)
    elif kind == "bool":
        value = reader.get(path)
        if not isinstance(value, bool):
            raise reader.error(path, f"expected true/false, got {value!r}")
        kwargs[key] = value
    else:
        value = reader.get(path)
        if not isinstance(value, str):
            raise reader.error(path, f"expected a string, got {value!r}")
        kwargs[key] = value


def _geometry_from(reader):
    sec = reader.section(("geometry",), set(_GEOMETRY_KEYS) | {"tiers", "noise_dbm"})
    kwargs = {}
    for key, attr in _GEOMETRY_KEYS.items():
        _apply(reader, kwargs, ("geometry", key), attr)
    if "noise_dbm" in sec:
        kwargs["noise_mw"] = dbm_to_mw(reader.number(("geometry", "noise_dbm")))
    if "tiers" in sec:
        tiers_raw = sec["tiers"]
        if not isinstance(tiers_raw, list) or not tiers_raw:
            raise reader.error(("geometry", "tiers"), "expected a non-empty list of tiers")
        tiers = []
        for i in range(len(tiers_raw)):
            path = ("geometry", "tiers", i)
            reader.section(path, {"name", "intensity_per_km2", "power_dbm"})
            name = reader.get(path + ("name",))
            try:
                tiers.append(TierConfig.from_dbm(
                    reader.number(path + ("intensity_per_km2",)),
                    reader.number(path + ("power_dbm",)),
                    "" if name is None else str(name),
                ))
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise reader.error(path, str(exc)) from None
        kwargs["tiers"] = tuple(tiers)
    try:
        return default_geometry(**kwargs)
    except ValueError as exc:
        raise reader.error(("geometry",), str(exc)) from None


def config_from_dict(data, lines=None) -> ScenarioConfig:
    """Build a ``ScenarioConfig`` from the parsed file contents."""
    reader = _Reader(data if data is not None else {}, lines or {})
    if not isinstance(reader.data, dict):
        raise ConfigError("top level must be a mapping", line=1)
    top = reader.section((), _TOP_KEYS)
    if "schema_version" not in top:
        raise ConfigError("missing schema_version", "schema_version", 1)
    version = reader.number(("schema_version",), integer=True)
    if version != SCHEMA_VERSION:
        raise reader.error(("schema_version",), f"unsupported schema version {version}")
    kwargs = {"geometry": _geometry_from(reader)}

    rate = {}
    reader.section(("rate",), {"bandwidth_hz", "efficiency"})
    _apply(reader, rate, ("rate", "bandwidth_hz"), "bandwidth_hz")
    _apply(reader, rate, ("rate", "efficiency"), "efficiency")
    try:
        kwargs["rate"] = RateParams(**rate)
    except ValueError as exc:
        raise reader.error(("rate",), str(exc)) from None

    _apply(reader, kwargs, ("pilot_eps",), "pilot_eps")
    _apply(reader, kwargs, ("output_dir",), "output_dir", "str")

    sweep = reader.section(("sweep",), {"rho_bar_kbps", "replications", "base_seed"})
    if "rho_bar_kbps" in sweep:
        values = sweep["rho_bar_kbps"]
        if not isinstance(values, list):
            raise reader.error(("sweep", "rho_bar_kbps"), "expected a list of numbers")
        kwargs["rho_sweep_kbps"] = tuple(reader.number(("sweep", "rho_bar_kbps", i)) for i in range(len(values)))
    _apply(reader, kwargs, ("sweep", "replications"), "replications", "int")
    _apply(reader, kwargs, ("sweep", "base_seed"), "base_seed", "int")

    solver = {}
    reader.section(("solver",), {"tol", "max_iter", "relaxation"})
    _apply(reader, solver, ("solver", "tol"), "tol")
    _apply(reader, solver, ("solver", "max_iter"), "max_iter", "int")
    _apply(reader, solver, ("solver", "relaxation"), "relaxation")
    kwargs["solver"] = SolverSettings(**solver)

    mc = {}
    reader.section(("meancell",), {"samples", "tol", "seed", "tail_correction", "network"})
    _apply(reader, mc, ("meancell", "samples"), "samples", "int")
    _apply(reader, mc, ("meancell", "tol"), "tol")
    _apply(reader, mc, ("meancell", "seed"), "seed", "int")
    _apply(reader, mc, ("meancell", "tail_correction"), "tail_correction", "bool")
    _apply(reader, mc, ("meancell", "network"), "network", "str")
    kwargs["meancell"] = MeanCellSettings(**mc)

    try:
        return ScenarioConfig(**kwargs)
    except ConfigError as exc:
        if exc.line is None and exc.field:
            raise reader.error(tuple(exc.field.split(".")), str(exc).split(": ", 1)[-1]) from None
        raise


def load_config(path) -> ScenarioConfig:
    """Read a YAML scenario file. Raises ``ConfigError`` (bad content) or ``OSError``."""
    with open(path) as fh:
        text = fh.read()
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          line=None if mark is None else mark.line + 1) from None
    lines = _line_index(node) if node is not None else {}
    return config_from_dict(data, lines)


def override(config: ScenarioConfig, **changes) -> ScenarioConfig:
    """Apply command-line style overrides; ``None`` values are ignored.

    Keys are ``ScenarioConfig`` fields, ``solver_<name>``, ``meancell_<name>``
    or ``geometry_<name>``.
    """
    top, solver, mc, geo = {}, {}, {}, {}
    for key, value in changes.items():
        if value is None:
            continue
        if key.startswith("solver_"):
            solver[key[7:]] = value
        elif key.startswith("meancell_"):
            mc[key[9:]] = value
        elif key.startswith("geometry_"):
            geo[key[9:]] = value
        else:
            top[key] = value
    if solver:
        top["solver"] = dataclasses.replace(config.solver, **solver)
    if mc:
        top["meancell"] = dataclasses.replace(config.meancell, **mc)
    if geo:
        if "sim_radius" in geo and "obs_radius" not in geo:
            geo["obs_radius"] = None
        try:
            top["geometry"] = dataclasses.replace(config.geometry, **geo)
        except ValueError as exc:
            raise ConfigError(str(exc), "geometry") from None
    if "rho_sweep_kbps" in top:
        top["rho_sweep_kbps"] = tuple(float(x) for x in top["rho_sweep_kbps"])
    return dataclasses.replace(config, **top)


# --- sweep -------------------------------------------------------------------

@dataclass
class ReplicationOutcome:
    """Results of one network realization across the whole sweep."""

    replication: int
    seed: int
    tables: list
    reports: list
    errors: list


@dataclass
class SweepPoint:
    rho_bar_kbps: float
    averages: TierAverages | None
    meancell: MeanCellSolution | None
    reports: list
    converged: bool
    failed: bool = False
    error: str = ""


@dataclass
class SweepResult:
    config: ScenarioConfig
    points: list
    outcomes: list = field(default_factory=list)  # per replication, with the cell tables

    @property
    def converged(self):
        return all(p.converged and not p.failed for p in self.points)

    @property
    def exit_code(self):
        return EXIT_OK if self.converged else EXIT_CONVERGENCE


def _run_replication(config: ScenarioConfig, k: int) -> ReplicationOutcome:
    seed = config.base_seed + k
    n = len(config.rho_sweep_kbps)
    tables, reports, errors = [None] * n, [None] * n, [None] * n
    try:
        snapshot = sample_network(config.geometry, seed)
        cells = assign_cells(snapshot)
    except Exception as exc:  # noqa: BLE001 - recorded per sweep point
        return ReplicationOutcome(k, seed, tables, reports, [repr(exc)] * n)
    for i, rho_bar in enumerate(config.rho_sweep_kbps):
        try:
            rho = config.rho_per_km2(rho_bar)
            problem = LoadProblem(snapshot, cells, rho, config.rate, config.pilot_eps)
            loads, report = solve_fixed_point(
                problem=problem, tol=config.solver.tol, max_iter=config.solver.max_iter,
                relaxation=config.solver.relaxation,
            )
            tables[i] = CellTable.from_solution(snapshot, cells, rho, loads)
            reports[i] = report
        except Exception as exc:  # noqa: BLE001
            errors[i] = repr(exc)
    return ReplicationOutcome(k, seed, tables, reports, errors)


def run_meancell(config: ScenarioConfig, rho_sweep_kbps=None) -> list[MeanCellSolution]:
    """Mean-cell solutions along the sweep, on one shared sample set."""
    mc = config.meancell
    samples = sample_typical_user(config.geometry, mc.samples, mc.seed, mc.network, mc.tail_correction)
    sweep = config.rho_sweep_kbps if rho_sweep_kbps is None else rho_sweep_kbps
    return [
        solve_mean_cell(config.geometry, config.rho_per_km2(x), config.rate, config.pilot_eps,
                        tol=mc.tol, samples=samples)
        for x in sweep
    ]


def run_sweep(config: ScenarioConfig, workers: int = 1, meancell: bool = True) -> SweepResult:
    """Typical-cell averages (and mean-cell solutions) for every sweep point.

    A replication that fails at some sweep point marks that point as failed;
    other points are unaffected. ``workers > 1`` spreads replications over
    processes; results do not depend on the worker count.
    """
    reps = range(config.replications)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_run_replication, [config] * len(reps), reps))
    else:
        outcomes = [_run_replication(config, k) for k in reps]
    mean_cells = run_meancell(config) if meancell else [None] * len(config.rho_sweep_kbps)
    points = []
    for i, rho_bar in enumerate(config.rho_sweep_kbps):
        errors = [o.errors[i] for o in outcomes if o.errors[i]]
        reports = [o.reports[i] for o in outcomes]
        if errors:
            logger.error("sweep point %g kbps aborted: %s", rho_bar, errors[0])
            points.append(SweepPoint(rho_bar, None, mean_cells[i], reports, False, True, errors[0]))
            continue
        averages = network_averages([o.tables[i] for o in outcomes], config.geometry.n_tiers)
        converged = all(r.converged for r in reports)
        if mean_cells[i] is not None:
            converged = converged and mean_cells[i].converged
        points.append(SweepPoint(rho_bar, averages, mean_cells[i], reports, converged))
    return SweepResult(config, points, outcomes)


# --- result files ------------------------------------------------------------

_METRICS = [
    ("mean_traffic_kbps", "mean_traffic", 1e-3),
    ("mean_load", "mean_load", 1.0),
    ("stable_fraction", "stable_fraction", 1.0),
    ("stable_fraction_cells", "stable_fraction_cells", 1.0),
    ("mean_users_stable", "mean_users_stable", 1.0),
]

TYPICAL_CELL_HEADER = ["rho_bar_kbps", "tier"]
for _name, _, _ in _METRICS:
    TYPICAL_CELL_HEADER += [_name, f"{_name}_std", f"{_name}_stderr"]
TYPICAL_CELL_HEADER += [
    "mean_user_throughput_kbps", "mean_user_throughput_kbps_std", "mean_user_throughput_kbps_stderr",
    "n_replications", "n_cells", "converged",
]

MEAN_CELL_HEADER = [
    "rho_bar_kbps", "tier", "mean_traffic_kbps", "mean_load", "stable_fraction",
    "mean_users_stable", "mean_user_throughput_kbps", "critical_traffic_kbps",
    "mean_users", "residual", "converged",
]

SOLVER_DIAGNOSTICS_HEADER = [
    "rho_bar_kbps", "replication", "seed", "iterations_lower", "iterations_upper", "converged",
    "sup_norm_residual", "uniqueness_gap", "unique", "lower_monotone", "upper_monotone", "ordered",
    "error",
]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def typical_cell_rows(result: SweepResult):
    labels = result.config.tier_labels
    rows = []
    for p in result.points:
        if p.averages is None:
            continue
        groups = [(ALL, p.averages.overall)] + [(labels[j - 1], g) for j, g in p.averages.tiers.items()]
        for label, g in groups:
            row = [p.rho_bar_kbps, label]
            for _, attr, scale in _METRICS:
                est = getattr(g, attr)
                row += [est.mean * scale, est.std * scale, est.sem * scale]
            spread = g.mean_user_throughput_spread
            row += [g.mean_user_throughput * 1e-3, spread.std * 1e-3, spread.sem * 1e-3,
                    g.n_replications, g.n_cells, p.converged]
            rows.append(row)
    return rows


def mean_cell_rows(config: ScenarioConfig, rho_sweep_kbps, solutions):
    labels = config.tier_labels
    rows = []
    for rho_bar, sol in zip(rho_sweep_kbps, solutions):
        groups = [(ALL, sol.overall)] + [(labels[j - 1], c) for j, c in sol.tiers.items()]
        for label, c in groups:
            stable = c.load < 1
            rows.append([
                rho_bar, label, c.traffic_bps * 1e-3, c.load, 1.0 if stable else 0.0,
                c.mean_users if stable else 0.0, c.throughput_bps * 1e-3, c.critical_bps * 1e-3,
                c.mean_users, sol.residual, sol.converged,
            ])
    return rows


def solver_rows(result: SweepResult):
    rows = []
    cfg = result.config
    for p in result.points:
        for k, rep in enumerate(p.reports):
            seed = cfg.base_seed + k
            if rep is None:
                rows.append([p.rho_bar_kbps, k, seed] + [None] * 9 + [p.error])
                continue
            rows.append([
                p.rho_bar_kbps, k, seed, rep.iterations, rep.upper_iterations, rep.converged,
                rep.sup_norm_residual, rep.uniqueness_gap, rep.unique, rep.lower_monotone,
                rep.upper_monotone, rep.ordered, "",
            ])
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_gnuplot(path, header, rows, group_col=1):
    """Whitespace-separated blocks, one per tier, separated by two blank lines."""
    blocks = {}
    for row in rows:
        blocks.setdefault(row[group_col], []).append(row)
    numeric = [i for i in range(len(header)) if i != group_col]
    with open(path, "w") as fh:
        for idx, (label, block) in enumerate(blocks.items()):
            if idx:
                fh.write("\n\n")
            fh.write(f"# tier {label} (index {idx})\n")
            fh.write("# " + " ".join(header[i] for i in numeric) + "\n")
            for row in block:
                fh.write(" ".join(_fmt(row[i]) for i in numeric) + "\n")


def write_results(result: SweepResult, output_dir=None, gnuplot=False):
    """Write typical_cell.csv, mean_cell.csv and solver_diagnostics.csv; returns the paths."""
    out = output_dir or result.config.output_dir
    os.makedirs(out, exist_ok=True)
    paths = {}
    typical = typical_cell_rows(result)
    paths["typical_cell"] = os.path.join(out, "typical_cell.csv")
    write_csv(paths["typical_cell"], TYPICAL_CELL_HEADER, typical)
    if all(p.meancell is not None for p in result.points):
        mean = mean_cell_rows(result.config, [p.rho_bar_kbps for p in result.points],
                              [p.meancell for p in result.points])
        paths["mean_cell"] = os.path.join(out, "mean_cell.csv")
        write_csv(paths["mean_cell"], MEAN_CELL_HEADER, mean)
        if gnuplot:
            paths["mean_cell_dat"] = os.path.join(out, "mean_cell.dat")
            write_gnuplot(paths["mean_cell_dat"], MEAN_CELL_HEADER, mean)
    paths["solver_diagnostics"] = os.path.join(out, "solver_diagnostics.csv")
    write_csv(paths["solver_diagnostics"], SOLVER_DIAGNOSTICS_HEADER, solver_rows(result))
    if gnuplot:
        paths["typical_cell_dat"] = os.path.join(out, "typical_cell.dat")
        write_gnuplot(paths["typical_cell_dat"], TYPICAL_CELL_HEADER, typical)
    return paths


@dataclass
class ModelCurves:
    """Model results read back from a typical- or mean-cell CSV: ``curves[tier][column]``."""

    curves: dict

    def tiers(self):
        return list(self.curves)

    def column(self, tier, name):
        return self.curves[tier][name]


def read_model_csv(path) -> ModelCurves:
    curves = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"rho_bar_kbps", "tier"} <= set(reader.fieldnames):
            raise MeasurementError([(1, "model file needs rho_bar_kbps and tier columns")])
        for row in reader:
            tier = row.pop("tier")
            bucket = curves.setdefault(tier, {})
            for key, value in row.items():
                try:
                    bucket.setdefault(key, []).append(float(value) if value != "" else math.nan)
                except ValueError:
                    bucket.setdefault(key, []).append(math.nan)
    for tier, bucket in curves.items():
        order = np.argsort(bucket["rho_bar_kbps"], kind="stable")
        curves[tier] = {k: np.asarray(v, dtype=float)[order] for k, v in bucket.items()}
    return ModelCurves(curves)


def model_curves(result: SweepResult) -> ModelCurves:
    """In-memory equivalent of ``read_model_csv`` on the typical-cell table."""
    curves = {}
    for row in typical_cell_rows(result):
        bucket = curves.setdefault(row[1], {})
        for name, value in zip(TYPICAL_CELL_HEADER, row):
            if name != "tier":
                bucket.setdefault(name, []).append(float(value))
    return ModelCurves({t: {k: np.asarray(v) for k, v in b.items()} for t, b in curves.items()})


# --- measurements ------------------------------------------------------------

MEASUREMENT_HEADER = ["hour", "tier", "traffic_kbps", "load", "users"]


@dataclass(frozen=True)
class MeasurementRow:
    hour: str
    tier: str
    traffic_kbps: float
    load: float
    users: float
    line: int


@dataclass(frozen=True)
class MeasurementPoint:
    """Per-hour means over the cells of one tier (or ``all``)."""

    hour: str
    tier: str
    traffic_kbps: float
    load: float
    users: float
    throughput_kbps: float
    n_rows: int


@dataclass
class MeasurementSet:
    rows: list
    points: list

    def for_tier(self, tier):
        return [p for p in self.points if p.tier == tier]


def _hour_key(hour):
    try:
        return (0, float(hour), hour)
    except ValueError:
        return (1, 0.0, hour)


def aggregate_measurements(rows) -> list[MeasurementPoint]:
    groups = {}
    for r in rows:
        groups.setdefault((r.hour, r.tier), []).append(r)
        groups.setdefault((r.hour, ALL), []).append(r)
    points = []
    for (hour, tier), members in sorted(groups.items(), key=lambda kv: (_hour_key(kv[0][0]), kv[0][1] != ALL, kv[0][1])):
        traffic = float(np.mean([r.traffic_kbps for r in members]))
        users = float(np.mean([r.users for r in members]))
        throughput = traffic / users if users > 0 else math.nan
        points.append(MeasurementPoint(hour, tier, traffic, float(np.mean([r.load for r in members])),
                                       users, throughput, len(members)))
    return points


def ingest_measurements(path, tier_labels=None) -> MeasurementSet:
    """Read and validate a ``hour,tier,traffic_kbps,load,users`` file.

    All malformed rows are collected and reported together with their line
    numbers. Hours with zero users get a missing (nan) throughput.
    """
    problems = []
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MEASUREMENT_HEADER:
            raise MeasurementError([(1, f"expected header {','.join(MEASUREMENT_HEADER)}, got {header}")])
        for line, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(MEASUREMENT_HEADER):
                problems.append((line, f"expected {len(MEASUREMENT_HEADER)} fields, got {len(raw)}"))
                continue
            hour, tier = raw[0].strip(), raw[1].strip()
            try:
                traffic, load, users = (float(c) for c in raw[2:])
            except ValueError:
                problems.append((line, f"non-numeric value in {raw[2:]}"))
                continue
            if not all(math.isfinite(v) for v in (traffic, load, users)):
                problems.append((line, "values must be finite"))
            elif not 0 <= load <= 1:
                problems.append((line, f"load {load} outside [0, 1]"))
            elif traffic < 0 or users < 0:
                problems.append((line, "traffic and users must be >= 0"))
            elif tier_labels is not None and tier not in tier_labels:
                problems.append((line, f"unknown tier {tier!r}"))
            else:
                rows.append(MeasurementRow(hour, tier, traffic, load, users, line))
    if problems:
        raise MeasurementError(problems)
    return MeasurementSet(rows, aggregate_measurements(rows))


MEASUREMENT_POINTS_HEADER = ["hour", "tier", "traffic_kbps", "load", "users", "throughput_kbps", "n_rows"]


def write_measurement_points(mset: MeasurementSet, path):
    write_csv(path, MEASUREMENT_POINTS_HEADER, [
        [p.hour, p.tier, p.traffic_kbps, p.load, p.users, p.throughput_kbps, p.n_rows] for p in mset.points
    ])


# --- comparison --------------------------------------------------------------

# measured attribute -> model column
COMPARED_METRICS = {
    "load": "mean_load",
    "users": "mean_users_stable",
    "throughput_kbps": "mean_user_throughput_kbps",
}


@dataclass(frozen=True)
class ComparisonRow:
    hour: str
    tier: str
    metric: str
    traffic_kbps: float
    measured: float
    model: float
    abs_residual: float
    rel_residual: float
    in_range: bool


@dataclass(frozen=True)
class ComparisonSummary:
    tier: str
    metric: str
    n_points: int
    n_out_of_range: int
    median_rel_residual: float
    max_rel_residual: float


@dataclass
class Comparison:
    rows: list
    summary: list

    def summary_for(self, tier, metric):
        for s in self.summary:
            if s.tier == tier and s.metric == metric:
                return s
        raise KeyError((tier, metric))


def compare(model: ModelCurves, measurements: MeasurementSet, metrics=None) -> Comparison:
    """Residuals ``measured - model`` of every measurement point against the model curve.

    The model curve of a tier is interpolated linearly in that tier's mean
    traffic per cell, at the measured traffic of the point. Points outside
    the traffic range of the model are flagged and left without residual.
    Relative residuals are taken with respect to the model value.
    """
    metrics = list(COMPARED_METRICS) if metrics is None else list(metrics)
    rows = []
    for p in measurements.points:
        if p.tier not in model.curves:
            raise ValueError(f"tier {p.tier!r} missing from the model results")
        curve = model.curves[p.tier]
        x = curve["mean_traffic_kbps"]
        order = np.argsort(x)
        x = x[order]
        inside = bool(x[0] <= p.traffic_kbps <= x[-1])
        for metric in metrics:
            measured = getattr(p, metric)
            y = curve[COMPARED_METRICS[metric]][order]
            if inside and not math.isnan(measured):
                value = float(np.interp(p.traffic_kbps, x, y))
                abs_res = measured - value
                rel_res = abs_res / value if value != 0 else math.nan
            else:
                value = abs_res = rel_res = math.nan
            rows.append(ComparisonRow(p.hour, p.tier, metric, p.traffic_kbps, measured, value,
                                      abs_res, rel_res, inside))
    summary = []
    keys = sorted({(r.tier, r.metric) for r in rows}, key=lambda k: (k[0] != ALL, k[0], metrics.index(k[1])))
    for tier, metric in keys:
        sel = [r for r in rows if r.tier == tier and r.metric == metric]
        rel = np.array([abs(r.rel_residual) for r in sel if not math.isnan(r.rel_residual)])
        summary.append(ComparisonSummary(
            tier, metric, len(sel), sum(not r.in_range for r in sel),
            float(np.median(rel)) if len(rel) else math.nan,
            float(rel.max()) if len(rel) else math.nan,
        ))
    return Comparison(rows, summary)


COMPARISON_HEADER = ["hour", "tier", "metric", "traffic_kbps", "measured", "model",
                     "abs_residual", "rel_residual", "in_range"]
COMPARISON_SUMMARY_HEADER = ["tier", "metric", "n_points", "n_out_of_range",
                             "median_abs_rel_residual", "max_abs_rel_residual"]


def write_comparison(comparison: Comparison, path, summary_path=None):
    write_csv(path, COMPARISON_HEADER, [
        [r.hour, r.tier, r.metric, r.traffic_kbps, r.measured, r.model, r.abs_residual,
         r.rel_residual, r.in_range] for r in comparison.rows
    ])
    if summary_path:
        write_csv(summary_path, COMPARISON_SUMMARY_HEADER, [
            [s.tier, s.metric, s.n_points, s.n_out_of_range, s.median_rel_residual, s.max_rel_residual]
            for s in comparison.summary
        ])


def synthetic_measurements(
    model: ModelCurves,
    tier_fractions: dict,
    hours=24,
    rho_range_kbps=(150.0, 600.0),
    cells_per_hour=80,
    noise=0.05,
    load_scale=1.0,
    seed=0,
) -> list[MeasurementRow]:
    """Field-like rows generated from model curves (SYNTHETIC, for tests and demos).

    Hourly traffic follows a daily cosine profile across ``rho_range_kbps``.
    Each hour has ``cells_per_hour`` cells split over tiers by
    ``tier_fractions``; every cell gets its tier's model traffic, load and
    users, each times an independent log-normal factor of spread ``noise``.
    ``load_scale`` biases the loads (for testing the comparison).
    """
    rng = np.random.default_rng(seed)
    lo, hi = rho_range_kbps
    counts = {t: int(round(f * cells_per_hour)) for t, f in tier_fractions.items()}
    allx = model.curves[ALL]["rho_bar_kbps"]
    rows = []
    for h in range(hours):
        rho_bar = lo + (hi - lo) * 0.5 * (1 - math.cos(2 * math.pi * h / max(hours, 1)))
        rho_bar = min(max(rho_bar, allx.min()), allx.max())
        for tier, count in counts.items():
            curve = model.curves[tier]
            at = {
                name: float(np.interp(rho_bar, curve["rho_bar_kbps"], curve[col]))
                for name, col in (("traffic", "mean_traffic_kbps"), ("load", "mean_load"),
                                  ("users", "mean_users_stable"))
            }
            for _ in range(count):
                f = np.exp(noise * rng.standard_normal(3)) if noise > 0 else np.ones(3)
                load = min(at["load"] * load_scale * f[1], 1.0)
                rows.append(MeasurementRow(str(h), tier, at["traffic"] * f[0], load, at["users"] * f[2], 0))
    return rows


def write_measurements(rows, path):
    write_csv(path, MEASUREMENT_HEADER, [[r.hour, r.tier, r.traffic_kbps, r.load, r.users] for r in rows])


def config_to_dict(config: ScenarioConfig) -> dict:
    """Inverse of ``config_from_dict`` (for writing reproducible run files)."""
    g = config.geometry
    return {
        "schema_version": SCHEMA_VERSION,
        "geometry": {
            "sim_radius_km": g.sim_radius,
            "obs_radius_km": g.obs_radius,
            "grid_step_km": g.grid_step,
            "pathloss_K_per_km": g.pathloss_K,
            "pathloss_beta": g.pathloss_beta,
            "shadow_sigma_db": g.shadow_sigma_db,
            "shadow_corr_km": g.shadow_corr_km,
            "noise_dbm": mw_to_dbm(g.noise_mw),
            "tiers": [{"name": t.name, "intensity_per_km2": t.intensity, "power_dbm": t.power_dbm}
                      for t in g.tiers],
        },
        "rate": {"bandwidth_hz": config.rate.bandwidth_hz, "efficiency": config.rate.efficiency},
        "pilot_eps": config.pilot_eps,
        "sweep": {"rho_bar_kbps": list(config.rho_sweep_kbps), "replications": config.replications,
                  "base_seed": config.base_seed},
        "solver": dataclasses.asdict(config.solver),
        "meancell": dataclasses.asdict(config.meancell),
        "output_dir": config.output_dir,
    }
