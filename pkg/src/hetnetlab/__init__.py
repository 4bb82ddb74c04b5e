"""Flow-level performance of multi-tier cellular networks.

Poisson base-station layouts with log-normal shadowing, cell-load fixed
points, processor-sharing metrics averaged over the typical cell, and the
one-dimensional mean-cell approximation.
"""

from .cellmodel import CellMap, assign_cells, traffic_demand
from .geometry import (
    GeometryConfig,
    NetworkSnapshot,
    TierConfig,
    default_geometry,
    sample_network,
    sample_shadowing,
    tier_probability,
)
from .loadsolver import FixedPointReport, LoadProblem, load_operator, solve_fixed_point
from .meancell import (
    EquivalentNetwork,
    MeanCellSolution,
    equivalent_power,
    shadow_moment,
    solve_mean_cell,
    tier_selection_probability,
)
from .propagation import path_loss, propagation_loss, sinr
from .queuemetrics import CellMetrics, CellTable, TierAverages, cell_metrics, network_averages
from .ratemodel import RateParams, inverse_rate, peak_rate

__version__ = "0.1.0"
