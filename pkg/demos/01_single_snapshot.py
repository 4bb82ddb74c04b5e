"""One network realization, end to end.

Draws a two-tier layout with shadowing, builds the cells, solves the load
equations at a moderate traffic and prints what the busiest cells look like.
Run with ``python demos/01_single_snapshot.py``.
"""

import numpy as np

from hetnetlab import (
    CellTable,
    LoadProblem,
    assign_cells,
    default_geometry,
    sample_network,
    solve_fixed_point,
)

geometry = default_geometry()
snap = sample_network(geometry, seed=7)
cells = assign_cells(snap)

print(f"stations: {snap.n_stations} ({np.sum(snap.tiers == 1)} macro, {np.sum(snap.tiers == 2)} micro)")
print(f"observed cells: {np.sum(snap.in_obs & (cells.surfaces > 0))}")

# shadowing makes cells irregular; micro cells are much smaller on average
for tier in (1, 2):
    sel = snap.in_obs & (snap.tiers == tier) & (cells.surfaces > 0)
    print(f"tier {tier}: mean surface {cells.surfaces[sel].mean():.4f} km^2 over {sel.sum()} cells")

rho_bar_kbps = 400.0
rho = rho_bar_kbps * 1e3 * geometry.intensity  # bit/s per km^2
problem = LoadProblem(snap, cells, rho, pilot_eps=0.1)
loads, report = solve_fixed_point(problem=problem, tol=1e-6)
print(f"\nfixed point: {report.iterations} iterations, converged={report.converged}, "
      f"gap between the two tracks {report.uniqueness_gap:.2e}")

table = CellTable.from_solution(snap, cells, rho, loads)
obs = np.flatnonzero(table.observed)
print(f"unstable observed cells: {np.sum(~table.stable[obs])} of {len(obs)}")

print("\nbusiest observed cells")
print(" id tier  traffic kbps   load  users  throughput kbps")
for i in obs[np.argsort(table.load[obs])[::-1][:8]]:
    c = table.cell(i)
    print(f"{i:3d} {c.tier:4d} {c.traffic_bps / 1e3:13.1f} {c.load:6.3f} {c.mean_users:6.2f}"
          f" {c.throughput_bps / 1e3:16.1f}")
