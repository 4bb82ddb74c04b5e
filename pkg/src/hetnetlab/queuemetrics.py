"""Processor-sharing cell metrics and their typical-cell (network) averages.

Per cell, everything follows from the traffic demand ``rho`` and load
``theta``: critical traffic ``rho / theta``, throughput
``max(rho_c - rho, 0)``, mean users ``rho / r`` and busy probability
``min(theta, 1)``. Unstable cells (``theta >= 1``) carry ``N = inf`` and
``r = 0``.

Network averages are taken over cells of the observation disc:

* ``mean_traffic``, ``mean_load``: plain means over cells.
* ``mean_users_stable``: mean of ``N * 1{theta < 1}`` over all cells, so
  unstable cells count as zero.
* ``stable_fraction``: stable share of the cell *surface*.
* ``mean_user_throughput``: ``mean_traffic * stable_fraction / mean_users_stable``.

Point estimates pool the cells of all replications (sums over cells
divided by the cell count, or by the surface for ``stable_fraction``),
which is the natural estimator of a typical-cell expectation. The spread
is taken across replications: the sample standard deviation of the
per-replication values (the error bar) and its standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CellMetrics:
    traffic_bps: float
    load: float
    critical_bps: float
    busy_prob: float
    mean_users: float
    throughput_bps: float
    stable: bool
    tier: int


def cell_metrics(traffic_bps, load, tier=1) -> CellMetrics:
    """Steady-state processor-sharing metrics of one cell."""
    if traffic_bps < 0 or load < 0:
        raise ValueError("traffic and load must be >= 0")
    if load == 0 and traffic_bps > 0:
        raise ValueError("zero load with positive traffic is inconsistent")
    stable = load < 1
    if load == 0:
        # empty cell: no traffic, no users; critical traffic is not identifiable
        return CellMetrics(0.0, 0.0, math.nan, 0.0, 0.0, math.nan, True, tier)
    critical = traffic_bps / load
    throughput = max(critical - traffic_bps, 0.0) if stable else 0.0
    users = traffic_bps / throughput if throughput > 0 else math.inf
    return CellMetrics(float(traffic_bps), float(load), critical, min(load, 1.0),
                       users, throughput, stable, tier)


@dataclass
class CellTable:
    """Vectorized cell metrics for one network realization."""

    traffic_bps: np.ndarray
    load: np.ndarray
    surface_km2: np.ndarray
    tier: np.ndarray
    observed: np.ndarray
    critical_bps: np.ndarray = field(init=False)
    busy_prob: np.ndarray = field(init=False)
    mean_users: np.ndarray = field(init=False)
    throughput_bps: np.ndarray = field(init=False)
    stable: np.ndarray = field(init=False)

    def __post_init__(self):
        rho = np.asarray(self.traffic_bps, dtype=float)
        theta = np.asarray(self.load, dtype=float)
        if np.any((theta == 0) & (rho > 0)):
            raise ValueError("zero load with positive traffic is inconsistent")
        self.stable = theta < 1
        with np.errstate(divide="ignore", invalid="ignore"):
            self.critical_bps = np.where(theta > 0, rho / theta, np.nan)
            self.throughput_bps = np.where(self.stable, np.maximum(self.critical_bps - rho, 0.0), 0.0)
            self.mean_users = np.where(
                self.stable, np.where(rho > 0, rho / self.throughput_bps, 0.0), np.inf
            )
        self.busy_prob = np.minimum(theta, 1.0)

    @classmethod
    def from_solution(cls, snapshot, cellmap, rho_per_km2, loads):
        traffic = rho_per_km2 * cellmap.surfaces
        return cls(traffic, np.asarray(loads, dtype=float), cellmap.surfaces.copy(),
                   np.asarray(snapshot.tiers).copy(), snapshot.in_obs & (cellmap.surfaces > 0))

    def cell(self, i) -> CellMetrics:
        return CellMetrics(
            float(self.traffic_bps[i]), float(self.load[i]), float(self.critical_bps[i]),
            float(self.busy_prob[i]), float(self.mean_users[i]), float(self.throughput_bps[i]),
            bool(self.stable[i]), int(self.tier[i]),
        )


@dataclass(frozen=True)
class ReplicationAverages:
    """Averages of one replication over a cell subset (one tier or all)."""

    n_cells: int
    mean_traffic: float
    mean_load: float
    mean_users_stable: float
    stable_fraction: float
    stable_fraction_cells: float
    mean_user_throughput: float
    stable_traffic_sum: float
    stable_users_sum: float
    surface_sum: float
    stable_surface_sum: float


def replication_averages(table: CellTable, tier: int | None = None) -> ReplicationAverages | None:
    """Typical-cell averages over observed cells (optionally of one tier); ``None`` if empty."""
    sel = np.asarray(table.observed, dtype=bool)
    if tier is not None:
        sel = sel & (table.tier == tier)
    n = int(sel.sum())
    if n == 0:
        return None
    rho = table.traffic_bps[sel]
    stable = table.stable[sel]
    surface = table.surface_km2[sel]
    users_stable = np.where(stable, table.mean_users[sel], 0.0)
    mean_traffic = float(rho.mean())
    mean_users = float(users_stable.mean())
    pi_s = float(surface[stable].sum() / surface.sum())
    throughput = mean_traffic * pi_s / mean_users if mean_users > 0 else math.nan
    return ReplicationAverages(
        n, mean_traffic, float(table.load[sel].mean()), mean_users, pi_s,
        float(stable.mean()), throughput, float(rho[stable].sum()), float(users_stable.sum()),
        float(surface.sum()), float(surface[stable].sum()),
    )


@dataclass(frozen=True)
class Estimate:
    """Point estimate with the sample std across replications (error bar) and standard error."""

    mean: float
    std: float
    sem: float
    n: int

    @classmethod
    def of(cls, values):
        v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
        if len(v) == 0:
            return cls(math.nan, math.nan, math.nan, 0)
        std = float(v.std(ddof=1)) if len(v) > 1 else math.nan
        return cls(float(v.mean()), std, std / math.sqrt(len(v)) if len(v) > 1 else math.nan, len(v))

    @classmethod
    def pooled(cls, values, numerators, denominators):
        """Spread of per-replication ``values`` around ``sum(numerators) / sum(denominators)``."""
        spread = cls.of(values)
        den = float(np.sum(denominators))
        mean = float(np.sum(numerators)) / den if den > 0 else math.nan
        return cls(mean, spread.std, spread.sem, spread.n)


@dataclass(frozen=True)
class GroupAverages:
    """Network averages of one cell group (a tier or all cells) across replications."""

    mean_traffic: Estimate
    mean_load: Estimate
    mean_users_stable: Estimate
    stable_fraction: Estimate
    stable_fraction_cells: Estimate
    mean_user_throughput: float
    mean_user_throughput_spread: Estimate
    n_replications: int
    n_cells: int
    replications: tuple = ()


@dataclass(frozen=True)
class TierAverages:
    overall: GroupAverages
    tiers: dict

    def group(self, tier: int | None):
        return self.overall if tier is None else self.tiers[tier]


def _group(per_rep: list[ReplicationAverages | None]) -> GroupAverages:
    reps = [r for r in per_rep if r is not None]
    n = [r.n_cells for r in reps]

    def per_cell(attr):
        vals = [getattr(r, attr) for r in reps]
        return Estimate.pooled(vals, [v * k for v, k in zip(vals, n)], n)

    traffic = per_cell("mean_traffic")
    users = per_cell("mean_users_stable")
    pi_s = Estimate.pooled([r.stable_fraction for r in reps],
                           [r.stable_surface_sum for r in reps], [r.surface_sum for r in reps])
    if reps and users.mean > 0:
        throughput = traffic.mean * pi_s.mean / users.mean
    else:
        throughput = math.nan
    return GroupAverages(
        traffic,
        per_cell("mean_load"),
        users,
        pi_s,
        per_cell("stable_fraction_cells"),
        throughput,
        Estimate.of([r.mean_user_throughput for r in reps]),
        len(reps),
        sum(n),
        tuple(reps),
    )


def network_averages(tables: list[CellTable], n_tiers: int | None = None) -> TierAverages:
    """Aggregate per-replication cell tables into global and per-tier averages.

    A replication without cells of some tier contributes no sample for it.
    """
    if not tables:
        raise ValueError("need at least one replication")
    if n_tiers is None:
        n_tiers = int(max(int(t.tier.max(initial=1)) for t in tables))
    overall = _group([replication_averages(t) for t in tables])
    tiers = {j: _group([replication_averages(t, j) for t in tables]) for j in range(1, n_tiers + 1)}
    return TierAverages(overall, tiers)
