"""Comparing model curves with hourly cell measurements.

No field data ships with the package, so this demo generates a SYNTHETIC
measurement file from the model itself, with a 5% log-normal jitter and
loads biased up by 10%, then runs the same ingest and compare steps the CLI
uses. Per tier, the load residuals should sit near +10% and the users
near 0. The "all" rows are off for another reason: the synthetic file
mixes tiers 60/40, far more micro cells than the modelled network has.
Run with ``python demos/03_measurement_comparison.py``.
"""

import os
import tempfile

from hetnetlab import harness

config = harness.override(
    harness.ScenarioConfig(),
    rho_sweep_kbps=[100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0],
    replications=3,
)
result = harness.run_sweep(config, meancell=False)
model = harness.model_curves(result)

out = tempfile.mkdtemp(prefix="hetnetlab_demo_")
path = os.path.join(out, "synthetic_measurements.csv")
rows = harness.synthetic_measurements(model, dict(zip(config.tier_labels, (0.6, 0.4))), load_scale=1.1, seed=3)
harness.write_measurements(rows, path)
print(f"SYNTHETIC measurements: {len(rows)} rows in {path}")

mset = harness.ingest_measurements(path, set(config.tier_labels))
comparison = harness.compare(model, mset)
print("\ntier  metric              median |rel|  max |rel|  out of range")
for s in comparison.summary:
    print(f"{s.tier:>4}  {s.metric:<18} {s.median_rel_residual:12.3f} {s.max_rel_residual:10.3f}"
          f"  {s.n_out_of_range}/{s.n_points}")
