import csv
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetnetlab import harness
from hetnetlab.harness import (
    ALL,
    MEAN_CELL_HEADER,
    SOLVER_DIAGNOSTICS_HEADER,
    TYPICAL_CELL_HEADER,
    ConfigError,
    MeasurementError,
    MeasurementRow,
    ScenarioConfig,
)


def tiny_config(**kw):
    base = harness.config_from_dict({
        "schema_version": 1,
        "geometry": {
            "sim_radius_km": 1.4, "obs_radius_km": 0.9, "grid_step_km": 0.1,
            # more micro stations than the default so every replication has some
            "tiers": [{"name": "macro", "intensity_per_km2": 4.0, "power_dbm": 58.26},
                      {"name": "micro", "intensity_per_km2": 2.0, "power_dbm": 47.42}],
        },
        "sweep": {"rho_bar_kbps": [200, 500, 800], "replications": 2, "base_seed": 7},
        "meancell": {"samples": 200},
    })
    return harness.override(base, **kw)


def write(tmp_path, text, name="s.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


# --- configuration -----------------------------------------------------------

def test_default_scenario():
    cfg = ScenarioConfig()
    assert cfg.replications == 10
    assert cfg.rho_sweep_kbps == tuple(float(x) for x in range(100, 1001, 100))
    assert cfg.pilot_eps == 0.1
    assert cfg.tier_labels == ["macro", "micro"]
    assert cfg.rho_per_km2(600) == pytest.approx(600e3 * 4.62)


def test_load_full_config(tmp_path):
    path = write(tmp_path, """\
schema_version: 1
geometry:
  sim_radius_km: 3.0
  grid_step_km: 0.05
  noise_dbm: -100
  tiers:
    - {name: big, intensity_per_km2: 2.0, power_dbm: 50}
rate: {bandwidth_hz: 10.0e6, efficiency: 0.5}
pilot_eps: 0.05
sweep: {rho_bar_kbps: [100, 250], replications: 3, base_seed: 11}
solver: {tol: 1e-5, max_iter: 50, relaxation: 0.8}
meancell: {samples: 99, tail_correction: true, network: heterogeneous}
output_dir: somewhere
""")
    cfg = harness.load_config(path)
    assert cfg.geometry.sim_radius == 3.0
    assert cfg.geometry.obs_radius == pytest.approx(1.5)
    assert cfg.geometry.noise_mw == pytest.approx(1e-10)
    assert cfg.tier_labels == ["big"]
    assert cfg.rate.bandwidth_hz == 10e6
    assert cfg.rho_sweep_kbps == (100.0, 250.0)
    assert cfg.solver.tol == 1e-5 and cfg.solver.relaxation == 0.8
    assert cfg.meancell.samples == 99 and cfg.meancell.tail_correction
    assert cfg.output_dir == "somewhere"
    # round trip
    assert harness.config_from_dict(harness.config_to_dict(cfg)) == cfg


@pytest.mark.parametrize("text,line,field", [
    ("schema_version: 1\nsweep:\n  rho_bar_kbps: []\n", 3, "sweep.rho_bar_kbps"),
    ("schema_version: 1\nsweep:\n  replications: 0\n", 3, "sweep.replications"),
    ("schema_version: 1\nsweep:\n  rho_bar_kbps: [100, -5]\n", 3, "sweep.rho_bar_kbps"),
    ("schema_version: 1\ngeometry:\n  sim_radius_km: 2\n  bogus: 3\n", 4, "geometry.bogus"),
    ("schema_version: 1\nsolver:\n  tol: abc\n", 3, "solver.tol"),
    ("schema_version: 2\n", 1, "schema_version"),
    ("pilot_eps: 0.1\n", 1, "schema_version"),
    ("schema_version: 1\npilot_eps: 3\n", 2, "pilot_eps"),
    ("schema_version: 1\ngeometry:\n  sim_radius_km: 2\n  obs_radius_km: 2.5\n", 2, "geometry"),
    ("schema_version: 1\ngeometry:\n  tiers:\n    - {intensity_per_km2: -1, power_dbm: 3}\n", 4, "geometry.tiers.0"),
    ("schema_version: 1\nmeancell:\n  tail_correction: maybe\n", 3, "meancell.tail_correction"),
    ("schema_version: 1\nsweep:\n  replications: 2.5\n", 3, "sweep.replications"),
])
def test_config_errors_carry_context(tmp_path, text, line, field):
    with pytest.raises(ConfigError) as info:
        harness.load_config(write(tmp_path, text))
    assert info.value.line == line
    assert info.value.field == field
    assert f"line {line}" in str(info.value)


def test_yaml_syntax_error(tmp_path):
    with pytest.raises(ConfigError) as info:
        harness.load_config(write(tmp_path, "schema_version: 1\nsweep: [1, 2\n"))
    assert info.value.line is not None


def test_missing_config_file(tmp_path):
    with pytest.raises(OSError):
        harness.load_config(tmp_path / "nope.yaml")


@settings(max_examples=40, deadline=None)
@given(
    sim=st.floats(0.5, 10.0), frac=st.floats(0.2, 0.95), step=st.sampled_from([0.01, 0.05, 0.1]),
    eps=st.floats(0.0, 1.0), reps=st.integers(1, 50), seed=st.integers(0, 2**31),
    rho=st.lists(st.floats(1.0, 5000.0), min_size=1, max_size=6),
    tail=st.booleans(), network=st.sampled_from(["equivalent", "heterogeneous"]),
)
def test_config_dict_round_trip(sim, frac, step, eps, reps, seed, rho, tail, network):
    config = harness.override(
        ScenarioConfig(), geometry_sim_radius=sim, geometry_obs_radius=sim * frac, geometry_grid_step=step,
        pilot_eps=eps, replications=reps, base_seed=seed, rho_sweep_kbps=rho,
        meancell_tail_correction=tail, meancell_network=network,
    )
    assert harness.config_from_dict(harness.config_to_dict(config)) == config


def test_override_precedence(tmp_path):
    cfg = harness.load_config(write(tmp_path, "schema_version: 1\nsweep: {replications: 4}\npilot_eps: 0.2\n"))
    assert cfg.replications == 4          # file beats default
    assert cfg.base_seed == 0              # default kept
    out = harness.override(cfg, replications=6, pilot_eps=None, solver_tol=1e-3,
                           geometry_sim_radius=3.0, rho_sweep_kbps=[50])
    assert out.replications == 6          # flag beats file
    assert out.pilot_eps == 0.2            # absent flag leaves file value
    assert out.solver.tol == 1e-3
    assert out.geometry.sim_radius == 3.0 and out.geometry.obs_radius == 1.5
    assert out.rho_sweep_kbps == (50.0,)
    with pytest.raises(ConfigError):
        harness.override(cfg, rho_sweep_kbps=[])


# --- sweep -------------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_result():
    return harness.run_sweep(tiny_config())


def test_sweep_layout(tiny_result):
    assert len(tiny_result.points) == 3
    assert tiny_result.converged and tiny_result.exit_code == 0
    rows = harness.typical_cell_rows(tiny_result)
    assert len(rows) == 3 * 3
    assert [r[1] for r in rows[:3]] == [ALL, "macro", "micro"]
    for p in tiny_result.points:
        assert p.averages.overall.n_replications == 2
        assert p.meancell.converged


def test_default_sweep_layout():
    cfg = harness.override(tiny_config(), rho_sweep_kbps=list(range(100, 1001, 100)), replications=1)
    result = harness.run_sweep(cfg)
    rows = harness.typical_cell_rows(result)
    assert len(rows) == 10 * 3
    assert sorted({r[0] for r in rows}) == [float(x) for x in range(100, 1001, 100)]


def test_mean_traffic_follows_sweep(tiny_result):
    for p in tiny_result.points:
        assert p.meancell.overall.traffic_bps == pytest.approx(p.rho_bar_kbps * 1e3)
        ratio = p.averages.overall.mean_traffic.mean / (p.rho_bar_kbps * 1e3)
        assert 0.5 < ratio < 1.5


def test_results_files_and_headers(tmp_path, tiny_result):
    paths = harness.write_results(tiny_result, tmp_path / "out", gnuplot=True)
    expected = {"typical_cell", "mean_cell", "solver_diagnostics", "typical_cell_dat", "mean_cell_dat"}
    assert set(paths) == expected
    with open(paths["typical_cell"]) as fh:
        header = next(csv.reader(fh))
    assert header == TYPICAL_CELL_HEADER
    assert header[:2] == ["rho_bar_kbps", "tier"]
    with open(paths["mean_cell"]) as fh:
        assert next(csv.reader(fh)) == MEAN_CELL_HEADER
    with open(paths["solver_diagnostics"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == SOLVER_DIAGNOSTICS_HEADER
    assert len(rows) == 1 + 3 * 2
    dat = open(paths["typical_cell_dat"]).read()
    assert dat.count("# tier") == 3 and "\n\n\n" in dat


def test_golden_headers():
    assert TYPICAL_CELL_HEADER == [
        "rho_bar_kbps", "tier",
        "mean_traffic_kbps", "mean_traffic_kbps_std", "mean_traffic_kbps_stderr",
        "mean_load", "mean_load_std", "mean_load_stderr",
        "stable_fraction", "stable_fraction_std", "stable_fraction_stderr",
        "stable_fraction_cells", "stable_fraction_cells_std", "stable_fraction_cells_stderr",
        "mean_users_stable", "mean_users_stable_std", "mean_users_stable_stderr",
        "mean_user_throughput_kbps", "mean_user_throughput_kbps_std", "mean_user_throughput_kbps_stderr",
        "n_replications", "n_cells", "converged",
    ]
    assert MEAN_CELL_HEADER == [
        "rho_bar_kbps", "tier", "mean_traffic_kbps", "mean_load", "stable_fraction",
        "mean_users_stable", "mean_user_throughput_kbps", "critical_traffic_kbps",
        "mean_users", "residual", "converged",
    ]
    assert SOLVER_DIAGNOSTICS_HEADER == [
        "rho_bar_kbps", "replication", "seed", "iterations_lower", "iterations_upper", "converged",
        "sup_norm_residual", "uniqueness_gap", "unique", "lower_monotone", "upper_monotone",
        "ordered", "error",
    ]
    assert harness.MEASUREMENT_HEADER == ["hour", "tier", "traffic_kbps", "load", "users"]


def test_bit_identical_reruns(tmp_path):
    cfg = harness.override(tiny_config(), replications=1)
    a = harness.write_results(harness.run_sweep(cfg), tmp_path / "a")
    b = harness.write_results(harness.run_sweep(cfg), tmp_path / "b")
    for key in a:
        assert open(a[key], "rb").read() == open(b[key], "rb").read()


def test_workers_do_not_change_results(tmp_path, tiny_result):
    par = harness.run_sweep(tiny_config(), workers=2)
    fmt = lambda rows: [[harness._fmt(v) if not isinstance(v, str) else v for v in r] for r in rows]
    assert fmt(harness.typical_cell_rows(par)) == fmt(harness.typical_cell_rows(tiny_result))


def test_failed_replication_aborts_only_its_point(monkeypatch):
    real = harness.solve_fixed_point

    def flaky(problem=None, **kw):
        if abs(problem.rho - 500e3 * problem.snapshot.config.intensity) < 1e-6:
            raise FloatingPointError("boom")
        return real(problem=problem, **kw)

    monkeypatch.setattr(harness, "solve_fixed_point", flaky)
    result = harness.run_sweep(tiny_config(), meancell=False)
    failed = [p.rho_bar_kbps for p in result.points if p.failed]
    assert failed == [500.0]
    assert "boom" in result.points[1].error
    assert result.points[0].averages is not None and result.points[2].averages is not None
    assert result.exit_code == harness.EXIT_CONVERGENCE
    assert len(harness.typical_cell_rows(result)) == 2 * 3


def test_nonconvergence_sets_exit_code():
    result = harness.run_sweep(tiny_config(solver_max_iter=1, solver_tol=1e-12), meancell=False)
    assert not result.converged
    assert result.exit_code == harness.EXIT_CONVERGENCE


# --- measurements ------------------------------------------------------------

def measurement_file(tmp_path, body, name="m.csv"):
    return write(tmp_path, "hour,tier,traffic_kbps,load,users\n" + body, name)


def test_ingest_24_hours(tmp_path):
    body = "".join(f"{h},macro,{300 + h},0.{10 + h},{0.2 + h / 100}\n" for h in range(24))
    mset = harness.ingest_measurements(measurement_file(tmp_path, body), {"macro", "micro"})
    assert len(mset.rows) == 24
    assert len(mset.for_tier("macro")) == 24
    assert len(mset.for_tier(ALL)) == 24
    p = mset.for_tier("macro")[3]
    assert p.hour == "3" and p.throughput_kbps == pytest.approx(303 / 0.23)


def test_ingest_aggregates_per_hour_and_tier(tmp_path):
    body = "0,macro,100,0.2,0.5\n0,macro,300,0.4,1.5\n0,micro,50,0.1,0.25\n"
    mset = harness.ingest_measurements(measurement_file(tmp_path, body))
    macro = mset.for_tier("macro")[0]
    assert (macro.traffic_kbps, macro.load, macro.users, macro.n_rows) == (200.0, pytest.approx(0.3), 1.0, 2)
    assert macro.throughput_kbps == pytest.approx(200.0)
    overall = mset.for_tier(ALL)[0]
    assert overall.n_rows == 3 and overall.traffic_kbps == pytest.approx(150.0)


def test_ingest_zero_users_gives_missing_throughput(tmp_path):
    mset = harness.ingest_measurements(measurement_file(tmp_path, "5,macro,0,0.0,0\n"))
    assert len(mset.points) == 2
    assert math.isnan(mset.for_tier("macro")[0].throughput_kbps)


def test_ingest_single_row(tmp_path):
    mset = harness.ingest_measurements(measurement_file(tmp_path, "1,micro,120,0.05,0.1\n"))
    assert len(mset.for_tier("micro")) == 1


def test_ingest_reports_all_bad_lines(tmp_path):
    body = "0,macro,100,0.2,1\n1,macro,abc,0.2,1\n2,macro,100,1.5,1\n3,macro,100\n4,pico,1,0.1,1\n"
    with pytest.raises(MeasurementError) as info:
        harness.ingest_measurements(measurement_file(tmp_path, body), {"macro", "micro"})
    lines = [ln for ln, _ in info.value.problems]
    assert lines == [3, 4, 5, 6]
    assert "outside [0, 1]" in str(info.value)
    assert "line 6" in str(info.value)


def test_ingest_bad_header(tmp_path):
    with pytest.raises(MeasurementError):
        harness.ingest_measurements(write(tmp_path, "a,b\n1,2\n", "bad.csv"))


# --- comparison --------------------------------------------------------------

@pytest.fixture(scope="module")
def curves(tiny_result):
    return harness.model_curves(tiny_result)


def fractions():
    return {"macro": 2 / 3, "micro": 1 / 3}


def to_set(rows):
    return harness.MeasurementSet(rows, harness.aggregate_measurements(rows))


def test_round_trip_residuals_vanish(curves):
    rows = harness.synthetic_measurements(curves, fractions(), rho_range_kbps=(200, 800), noise=0.0)
    cmp = harness.compare(curves, to_set(rows))
    for tier in ("macro", "micro"):
        for metric in ("load", "users", "throughput_kbps"):
            s = cmp.summary_for(tier, metric)
            assert s.n_out_of_range == 0
            # load and users are read off the same piecewise-linear curves
            assert s.max_rel_residual < 1e-9 or metric == "throughput_kbps"
    # throughput is a ratio of two interpolants; on a 3-knot curve this costs a few percent
    assert cmp.summary_for("macro", "throughput_kbps").max_rel_residual < 0.2


def test_shifted_loads_show_up_in_residuals(curves):
    rows = harness.synthetic_measurements(curves, fractions(), rho_range_kbps=(200, 800),
                                          noise=0.0, load_scale=1.1)
    cmp = harness.compare(curves, to_set(rows))
    assert cmp.summary_for("macro", "load").median_rel_residual == pytest.approx(0.10, abs=1e-9)
    assert cmp.summary_for("micro", "users").median_rel_residual < 1e-9


def test_out_of_range_points_flagged(curves):
    rows = [MeasurementRow("0", "macro", 5.0, 0.01, 0.01, 2),
            MeasurementRow("1", "macro", 450.0, 0.2, 0.3, 3),
            MeasurementRow("2", "macro", 1e5, 0.9, 9.0, 4)]
    cmp = harness.compare(curves, to_set(rows), metrics=["load"])
    macro = [r for r in cmp.rows if r.tier == "macro"]
    assert [r.in_range for r in macro] == [False, True, False]
    assert math.isnan(macro[0].rel_residual) and not math.isnan(macro[1].rel_residual)
    assert cmp.summary_for("macro", "load").n_out_of_range == 2


def test_compare_rejects_unknown_tier(curves):
    rows = [MeasurementRow("0", "pico", 300.0, 0.1, 0.1, 2)]
    with pytest.raises(ValueError):
        harness.compare(curves, to_set(rows))


def test_model_csv_round_trip(tmp_path, tiny_result, curves):
    paths = harness.write_results(tiny_result, tmp_path)
    back = harness.read_model_csv(paths["typical_cell"])
    assert set(back.tiers()) == {ALL, "macro", "micro"}
    np.testing.assert_allclose(back.column("macro", "mean_load"), curves.column("macro", "mean_load"), rtol=1e-15)
    mean = harness.read_model_csv(paths["mean_cell"])
    assert "mean_load" in mean.curves["micro"]


def test_comparison_files(tmp_path, curves):
    rows = harness.synthetic_measurements(curves, fractions(), hours=6, rho_range_kbps=(250, 700))
    harness.write_measurements(rows, tmp_path / "m.csv")
    mset = harness.ingest_measurements(tmp_path / "m.csv", {"macro", "micro"})
    assert len(mset.for_tier(ALL)) == 6
    cmp = harness.compare(curves, mset)
    harness.write_comparison(cmp, tmp_path / "c.csv", tmp_path / "cs.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == ",".join(harness.COMPARISON_HEADER)
    assert len((tmp_path / "cs.csv").read_text().splitlines()) == 1 + 3 * 3


DATA = Path(__file__).resolve().parent.parent / "data"


def test_shipped_scenario_and_synthetic_fixture():
    config = harness.load_config(DATA / "scenario.yaml")
    assert config.tier_labels == ["macro", "micro"]
    mset = harness.ingest_measurements(DATA / "synthetic_measurements.csv", set(config.tier_labels))
    assert sorted({p.hour for p in mset.points}, key=int) == [str(h) for h in range(24)]
    assert {p.tier for p in mset.points} == {"macro", "micro", harness.ALL}
