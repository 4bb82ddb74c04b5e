"""Typical cell against the mean cell over a traffic sweep.

The typical-cell curves come from a few full network replications; the
mean-cell curves from the one-dimensional approximation. The mean cell
runs a little heavier than the typical cell and the gap widens with
traffic, as a few heavily loaded cells start to dominate the averages.
Run with ``python demos/02_sweep_vs_meancell.py`` (about a minute).
"""

from hetnetlab import harness

config = harness.override(
    harness.ScenarioConfig(),
    rho_sweep_kbps=[100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0],
    replications=4,
)
result = harness.run_sweep(config)

print("rho_bar   load(typ)  load(mean)  users(typ)  users(mean)  thr typ kbps  thr mean kbps  pi_S")
for p in result.points:
    avg = p.averages.overall
    mc = p.meancell.overall
    print(f"{p.rho_bar_kbps:7.0f} {avg.mean_load.mean:10.3f} {mc.load:11.3f} "
          f"{avg.mean_users_stable.mean:11.3f} {mc.mean_users:12.3f} "
          f"{avg.mean_user_throughput / 1e3:13.0f} {mc.throughput_bps / 1e3:14.0f} "
          f"{avg.stable_fraction.mean:5.2f}")

# per-tier view at one traffic level
p = result.points[3]
print(f"\nper tier at {p.rho_bar_kbps:.0f} kbps")
for tier, avg in p.averages.tiers.items():
    print(f"  tier {tier}: traffic {avg.mean_traffic.mean / 1e3:6.1f} kbps, load {avg.mean_load.mean:.3f}"
          f" (+/- {avg.mean_load.std:.3f} across replications), {avg.n_cells} cells")
