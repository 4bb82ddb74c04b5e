"""Service zones by strongest received power, on the pixel grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import NetworkSnapshot
from .propagation import gain_table


@dataclass(frozen=True, eq=False)
class CellMap:
    """Per-pixel serving station and per-station surface (km^2)."""

    serving: np.ndarray
    surfaces: np.ndarray
    pixel_area: float

    def __post_init__(self):
        self.serving.setflags(write=False)
        self.surfaces.setflags(write=False)

    @property
    def n_stations(self):
        return len(self.surfaces)

    @property
    def pixel_counts(self):
        return np.bincount(self.serving, minlength=self.n_stations)

    def pixels_of(self, station):
        return np.flatnonzero(self.serving == station)

    @property
    def total_area(self):
        return len(self.serving) * self.pixel_area


def assign_cells(snapshot: NetworkSnapshot, losses: np.ndarray | None = None) -> CellMap:
    """Each pixel goes to the station of minimal propagation loss; ties to the lowest id."""
    if losses is None:
        losses = 1.0 / gain_table(snapshot)
    if losses.shape[0] == 0:
        raise ValueError("snapshot has no stations")
    serving = np.argmin(losses, axis=0)
    counts = np.bincount(serving, minlength=losses.shape[0])
    area = snapshot.grid.pixel_area
    return CellMap(serving, counts * area, area)


def traffic_demand(cellmap: CellMap, station, rho_per_km2):
    """Traffic demand of a cell in bit/s: ``rho * surface``; zero-surface cells give 0."""
    return rho_per_km2 * cellmap.surfaces[station]


def write_pixel_csv(snapshot: NetworkSnapshot, cellmap: CellMap, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pixel_x_km", "pixel_y_km", "serving_id"])
        for (x, y), s in zip(snapshot.grid.centers, cellmap.serving):
            writer.writerow([f"{x:.6f}", f"{y:.6f}", int(s)])


def write_cell_csv(snapshot: NetworkSnapshot, cellmap: CellMap, rho_per_km2, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "tier", "surface_km2", "traffic_demand_bps"])
        for i in range(cellmap.n_stations):
            writer.writerow([
                i, int(snapshot.tiers[i]), repr(float(cellmap.surfaces[i])),
                repr(float(traffic_demand(cellmap, i, rho_per_km2))),
            ])
