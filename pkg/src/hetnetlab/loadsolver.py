"""Cell-load fixed point on a network snapshot.

The load of cell ``X`` is ``rho * integral over V(X) of 1 / R(SINR)``, where
the SINR weights each interferer ``Y`` by ``min(theta_Y, 1)`` (plus the pilot
share). The right-hand side is increasing in every load, so Picard iteration
from ``theta = 0`` climbs to the minimal solution and iteration from
``theta = 1`` descends to the maximal one. Both tracks are run and their gap
is reported instead of assuming uniqueness.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .cellmodel import CellMap
from .geometry import NetworkSnapshot
from .propagation import gain_table, interference_weights
from .ratemodel import as_rate_model

logger = logging.getLogger(__name__)

LOAD_CAP = 1e6


class LoadProblem:
    """Static part of the load operator: gains, serving map, pixel weights.

    Built once per (snapshot, cells); each call only recomputes the
    interference weights.
    """

    def __init__(self, snapshot: NetworkSnapshot, cellmap: CellMap, rho, rate=None, pilot_eps=0.0):
        if rho < 0:
            raise ValueError("rho must be >= 0")
        if not 0 <= pilot_eps <= 1:
            raise ValueError("pilot_eps must lie in [0, 1]")
        self.snapshot = snapshot
        self.cellmap = cellmap
        self.rho = float(rho)
        self.rate = as_rate_model(rate)
        self.pilot_eps = float(pilot_eps)
        self.noise = snapshot.config.noise_mw
        gains = gain_table(snapshot)
        cols = np.arange(gains.shape[1])
        serving = cellmap.serving
        self.signal = gains[serving, cols]
        self.offcell = gains.copy()
        self.offcell[serving, cols] = 0.0
        self.n_stations = gains.shape[0]
        # convergence is gated only by cells the typical user can reach inside the obs disc
        self.gate = snapshot.in_obs & (cellmap.surfaces > 0)

    def sinr(self, theta):
        w = interference_weights(theta, self.pilot_eps)
        return self.signal / (self.noise + w @ self.offcell)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < 0):
            raise ValueError("loads must be >= 0")
        if self.rho == 0:
            return np.zeros(self.n_stations)
        inv = self.rate.inverse_rate(self.sinr(theta))
        cell_sum = np.bincount(self.cellmap.serving, weights=inv, minlength=self.n_stations)
        out = self.rho * self.cellmap.pixel_area * cell_sum
        return np.minimum(out, LOAD_CAP)


def load_operator(theta, snapshot, cellmap, rho, rate=None, pilot_eps=0.0):
    """One application of the cell-load map (stand-alone convenience wrapper)."""
    return LoadProblem(snapshot, cellmap, rho, rate, pilot_eps)(theta)


@dataclass
class FixedPointReport:
    iterations: int
    converged: bool
    sup_norm_residual: float
    lower_solution: np.ndarray
    upper_solution: np.ndarray
    uniqueness_gap: float
    unique: bool
    lower_monotone: bool = True
    upper_monotone: bool = True
    ordered: bool = True
    upper_iterations: int = 0
    history: list = field(default_factory=list)


def _sup(x, mask):
    return float(np.max(np.abs(x[mask]))) if mask.any() else 0.0


def solve_fixed_point(
    snapshot: NetworkSnapshot | None = None,
    cellmap: CellMap | None = None,
    rho=0.0,
    rate=None,
    pilot_eps=0.0,
    tol=1e-4,
    max_iter=200,
    relaxation=1.0,
    problem: LoadProblem | None = None,
):
    """Solve the cell-load equations; returns ``(lower_solution, report)``.

    Monotonicity of both tracks and their ordering are checked at every
    step (with a ``1e-9`` slack) and recorded in the report. ``relaxation``
    ``omega`` in (0, 1] replaces each step by ``(1 - omega) theta + omega T(theta)``.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    if not 0 < relaxation <= 1:
        raise ValueError("relaxation must lie in (0, 1]")
    if problem is None:
        problem = LoadProblem(snapshot, cellmap, rho, rate, pilot_eps)
    gate = problem.gate
    slack = 1e-9
    lower = np.zeros(problem.n_stations)
    upper = np.ones(problem.n_stations)
    lower_done = upper_done = False
    report = FixedPointReport(0, False, np.inf, lower, upper, np.inf, False)
    for it in range(1, max_iter + 1):
        change_lo = change_up = 0.0
        if not lower_done:
            new = (1 - relaxation) * lower + relaxation * problem(lower)
            if np.any(new < lower - slack * (1 + np.abs(lower))):
                report.lower_monotone = False
            change_lo = _sup(new - lower, gate)
            lower = new
            lower_done = change_lo < tol
            report.iterations = it
        if not upper_done:
            new = (1 - relaxation) * upper + relaxation * problem(upper)
            if np.any(np.minimum(new, 1) > np.minimum(upper, 1) + slack):
                report.upper_monotone = False
            change_up = _sup(new - upper, gate)
            upper = new
            upper_done = change_up < tol
            report.upper_iterations = it
        if np.any(np.minimum(lower, 1) > np.minimum(upper, 1) + slack):
            report.ordered = False
        gap = _sup(upper - lower, gate)
        report.history.append((it, change_lo, change_up, gap))
        if lower_done and upper_done:
            break
    report.converged = lower_done and upper_done
    report.lower_solution = lower
    report.upper_solution = upper
    report.uniqueness_gap = _sup(upper - lower, gate)
    report.unique = report.uniqueness_gap <= 10 * tol
    report.sup_norm_residual = _sup(problem(lower) - lower, gate)
    if not report.converged:
        logger.warning("cell-load iteration did not converge in %d iterations", max_iter)
    if not report.unique:
        logger.info("min/max load solutions differ by %.3g", report.uniqueness_gap)
    return lower, report


DIAGNOSTICS_HEADER = ["iteration", "sup_norm_change_lower", "sup_norm_change_upper", "gap"]


def write_diagnostics_csv(report: FixedPointReport, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSTICS_HEADER)
        for row in report.history:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
