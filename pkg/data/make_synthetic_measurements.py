"""Regenerate ``synthetic_measurements.csv`` and ``scenario.yaml``.

The measurements are SYNTHETIC: model curves of the default scenario plus 5%
log-normal noise, 24 hourly points with 80 cells each. They exist so that
``hetnetlab ingest`` and ``hetnetlab compare`` have something to chew on; no
field data is distributed with the package.
"""

import os

import yaml

from hetnetlab import harness

here = os.path.dirname(os.path.abspath(__file__))
config = harness.override(
    harness.ScenarioConfig(),
    rho_sweep_kbps=[100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0],
    replications=4,
)
with open(os.path.join(here, "scenario.yaml"), "w") as fh:
    yaml.safe_dump(harness.config_to_dict(config), fh, sort_keys=False)

result = harness.run_sweep(config, meancell=False)
model = harness.model_curves(result)
# tier mix of the modelled network: about 96% macro cells
fractions = dict(zip(config.tier_labels, (0.96, 0.04)))
rows = harness.synthetic_measurements(model, fractions, cells_per_hour=100, seed=2024)
harness.write_measurements(rows, os.path.join(here, "synthetic_measurements.csv"))
print(f"{len(rows)} synthetic rows written")
