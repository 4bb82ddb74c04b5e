"""Multi-tier Poisson base-station layouts with correlated log-normal shadowing.

Stations are drawn in a disc of radius ``sim_radius`` around the origin.
Every spatial quantity downstream (cells, loads, SINR) lives on one square
pixel grid restricted to that disc. Shadowing for each station is a
stationary Gaussian field in dB with exponential correlation, sampled by
circulant embedding on the grid.
"""

from __future__ import annotations

import csv
import functools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import fft as sp_fft

from .units import dbm_to_mw, mw_to_dbm

SNAPSHOT_FORMAT_VERSION = 1
GUARD_KM = 1.5


@dataclass(frozen=True)
class TierConfig:
    """One class of base stations: intensity in km^-2 and power in mW."""

    intensity: float
    power_mw: float
    name: str = ""

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError(f"tier intensity must be > 0, got {self.intensity}")
        if not self.power_mw > 0:
            raise ValueError(f"tier power must be > 0, got {self.power_mw}")

    @classmethod
    def from_dbm(cls, intensity, power_dbm, name=""):
        return cls(float(intensity), dbm_to_mw(power_dbm), name)

    @property
    def power_dbm(self):
        return mw_to_dbm(self.power_mw)


@dataclass(frozen=True)
class GeometryConfig:
    """Network geometry and propagation constants.

    Distances are in km, powers in mW. Stations are generated in the disc of
    radius ``sim_radius``; statistics use stations within ``obs_radius``,
    which defaults to ``sim_radius - GUARD_KM`` (but at least half the disc).
    With 10 dB of nearly white shadowing a cell can win pixels far from its
    station, so the guard ring has to be well over one inter-site distance.
    """

    tiers: tuple[TierConfig, ...]
    sim_radius: float = 2.63 + 1.5
    obs_radius: float | None = None
    grid_step: float = 0.05
    pathloss_K: float = 7117.0
    pathloss_beta: float = 3.8
    shadow_sigma_db: float = 10.0
    shadow_corr_km: float = 0.05
    noise_mw: float = 10.0 ** (-96.0 / 10.0)

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))
        if not self.tiers:
            raise ValueError("at least one tier is required")
        if self.obs_radius is None:
            object.__setattr__(self, "obs_radius", max(self.sim_radius - GUARD_KM, 0.5 * self.sim_radius))
        if not (self.sim_radius > 0 and self.obs_radius > 0 and self.grid_step > 0):
            raise ValueError("radii and grid_step must be positive")
        if not self.obs_radius < self.sim_radius:
            raise ValueError(f"obs_radius ({self.obs_radius}) must be < sim_radius ({self.sim_radius})")
        if not self.pathloss_beta > 2:
            raise ValueError(f"pathloss_beta must be > 2, got {self.pathloss_beta}")
        if not self.pathloss_K > 0:
            raise ValueError("pathloss_K must be > 0")
        if self.shadow_sigma_db < 0 or self.shadow_corr_km < 0:
            raise ValueError("shadowing parameters must be >= 0")
        if not self.noise_mw >= 0:
            raise ValueError("noise_mw must be >= 0")

    @property
    def intensity(self):
        return sum(t.intensity for t in self.tiers)

    @property
    def n_tiers(self):
        return len(self.tiers)

    @property
    def intensities(self):
        return np.array([t.intensity for t in self.tiers])

    @property
    def powers_mw(self):
        return np.array([t.power_mw for t in self.tiers])

    @property
    def tier_names(self):
        return [t.name or f"tier{j + 1}" for j, t in enumerate(self.tiers)]

    def expected_station_count(self):
        return self.intensity * math.pi * self.sim_radius ** 2


def default_geometry(**overrides) -> GeometryConfig:
    """Two-tier macro/micro deployment: lambda = 4.62 km^-2, micro/macro ratio 0.039."""
    lam = 4.62
    ratio = 0.039
    lam1 = lam / (1.0 + ratio)
    tiers = (
        TierConfig.from_dbm(lam1, 58.26, "macro"),
        TierConfig.from_dbm(lam1 * ratio, 47.42, "micro"),
    )
    kwargs = dict(tiers=tiers)
    kwargs.update(overrides)
    return GeometryConfig(**kwargs)


def tier_probability(config: GeometryConfig, j: int) -> float:
    """Probability that an arbitrarily chosen station belongs to tier ``j`` (1-based)."""
    if not 1 <= j <= config.n_tiers:
        raise ValueError(f"tier index {j} outside 1..{config.n_tiers}")
    return config.tiers[j - 1].intensity / config.intensity


@dataclass(frozen=True)
class Grid:
    """Square pixel lattice centred on the origin, clipped to a disc.

    ``side`` pixels per axis; pixel ``(r, c)`` has centre
    ``((c - half) * step, (r - half) * step)``. ``flat_index`` lists the
    row-major indices of the pixels kept inside the disc.
    """

    step: float
    radius: float
    side: int
    flat_index: np.ndarray
    centers: np.ndarray

    @classmethod
    def for_disc(cls, radius, step):
        half = int(math.floor(radius / step))
        side = 2 * half + 1
        coords = (np.arange(side) - half) * step
        xx, yy = np.meshgrid(coords, coords)
        inside = (xx ** 2 + yy ** 2 <= radius ** 2).ravel()
        flat_index = np.flatnonzero(inside)
        centers = np.column_stack([xx.ravel()[flat_index], yy.ravel()[flat_index]])
        flat_index.setflags(write=False)
        centers.setflags(write=False)
        return cls(step, radius, side, flat_index, centers)

    @property
    def n_pixels(self):
        return len(self.flat_index)

    @property
    def pixel_area(self):
        return self.step ** 2

    @property
    def area(self):
        return self.n_pixels * self.pixel_area

    def nearest_pixel(self, point):
        d2 = np.sum((self.centers - np.asarray(point, dtype=float)) ** 2, axis=1)
        return int(np.argmin(d2))


@dataclass(frozen=True)
class BaseStation:
    id: int
    position: tuple[float, float]
    tier: int
    power_mw: float


@dataclass(frozen=True, eq=False)
class ShadowingField:
    """Positive linear shadowing multipliers, shape ``(n_stations, n_pixels)``."""

    values: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)

    def at(self, station, pixel):
        return float(self.values[station, pixel])

    @property
    def db(self):
        return 10.0 * np.log10(self.values)


@dataclass(frozen=True, eq=False)
class NetworkSnapshot:
    """One realization: station positions (km), 1-based tiers, powers, shadowing."""

    config: GeometryConfig
    positions: np.ndarray
    tiers: np.ndarray
    powers_mw: np.ndarray
    grid: Grid
    shadowing: ShadowingField | None
    seed: int | None = None

    def __post_init__(self):
        for arr in (self.positions, self.tiers, self.powers_mw):
            arr.setflags(write=False)

    @property
    def n_stations(self):
        return len(self.tiers)

    @property
    def stations(self) -> list[BaseStation]:
        return [
            BaseStation(i, (float(p[0]), float(p[1])), int(t), float(pw))
            for i, (p, t, pw) in enumerate(zip(self.positions, self.tiers, self.powers_mw))
        ]

    @property
    def in_obs(self):
        """Mask of stations inside the observation disc."""
        r = np.hypot(self.positions[:, 0], self.positions[:, 1])
        return r <= self.config.obs_radius

    def with_shadowing(self, shadowing):
        return NetworkSnapshot(
            self.config, self.positions, self.tiers, self.powers_mw, self.grid, shadowing, self.seed
        )

    def distances(self):
        """Station-to-pixel distances, shape ``(n_stations, n_pixels)``."""
        diff = self.positions[:, None, :] - self.grid.centers[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


def _check_window(config: GeometryConfig):
    expected = config.expected_station_count()
    if expected < 3:
        raise ValueError(
            f"expected station count {expected:.2f} < 3: window too small to form cells"
        )


def sample_stations(config: GeometryConfig, rng: np.random.Generator):
    """Poisson count, uniform positions in the disc, i.i.d. tier marks."""
    n = rng.poisson(config.expected_station_count())
    radius = config.sim_radius * np.sqrt(rng.random(n))
    angle = 2.0 * np.pi * rng.random(n)
    positions = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    probs = config.intensities / config.intensity
    tiers = rng.choice(config.n_tiers, size=n, p=probs) + 1
    powers = config.powers_mw[tiers - 1]
    return positions, tiers.astype(np.int64), powers


def sample_network(config: GeometryConfig, seed: int, shadowing: bool = True) -> NetworkSnapshot:
    """Draw one network realization; deterministic in ``(config, seed)``.

    Station placement and shadowing use independent streams spawned from
    ``seed``, so ``shadowing=False`` yields the same positions.
    """
    _check_window(config)
    pos_seq, shadow_seq = np.random.SeedSequence(seed).spawn(2)
    positions, tiers, powers = sample_stations(config, np.random.default_rng(pos_seq))
    grid = _grid_for(config.sim_radius, config.grid_step)
    snapshot = NetworkSnapshot(config, positions, tiers, powers, grid, None, seed)
    if shadowing:
        snapshot = snapshot.with_shadowing(sample_shadowing(snapshot, config, shadow_seq))
    return snapshot


@functools.lru_cache(maxsize=8)
def _grid_for(radius, step):
    return Grid.for_disc(radius, step)


@functools.lru_cache(maxsize=8)
def _embedding_sqrt_eigs(side, step, corr_km):
    """Square-root spectrum of the exponential covariance on a periodic torus.

    With a torus of ``side + pad`` pixels, every pair whose wrapped lag
    differs from the true one is more than ``pad / 2`` pixels apart, where
    both covariances are below ``exp(-15)``. That is far below Monte Carlo
    error, at a fraction of the classic ``2 * side`` size. Falls back to
    larger tori while the embedding has negative eigenvalues.
    """
    pad = int(math.ceil(30.0 * corr_km / step))
    sizes = [sp_fft.next_fast_len(side + pad)] if side + pad < 2 * side else []
    sizes += [2 * side, 4 * side, 8 * side]
    for m in sizes:
        lag = np.arange(m)
        lag = np.minimum(lag, m - lag) * step
        dist = np.hypot(lag[:, None], lag[None, :])
        eigs = np.fft.fft2(np.exp(-dist / corr_km)).real
        if eigs.min() >= -1e-9 * eigs.max():
            break
    else:
        warnings.warn("circulant embedding not positive definite; clipping negative eigenvalues")
    return np.sqrt(np.clip(eigs, 0.0, None) / (m * m))


def gaussian_fields(n_fields, side, step, corr_km, rng):
    """Unit-variance stationary Gaussian fields on a ``side x side`` grid.

    Covariance ``exp(-d / corr_km)``; ``corr_km == 0`` gives white noise.
    Each complex FFT draw yields two independent fields (real and imaginary).
    """
    if n_fields == 0:
        return np.empty((0, side, side))
    if corr_km == 0:
        return rng.standard_normal((n_fields, side, side))
    sqrt_eigs = _embedding_sqrt_eigs(side, step, corr_km)
    m = sqrt_eigs.shape[0]
    n_draws = (n_fields + 1) // 2
    z = rng.standard_normal((n_draws, m, m)) + 1j * rng.standard_normal((n_draws, m, m))
    y = np.fft.fft2(sqrt_eigs * z)
    fields = np.concatenate([y.real[:, :side, :side], y.imag[:, :side, :side]])
    return fields[:n_fields]


def sample_shadowing(snapshot: NetworkSnapshot, config: GeometryConfig, seed) -> ShadowingField:
    """Independent log-normal shadowing field per station, median 1 (zero-mean dB)."""
    grid = snapshot.grid
    n = snapshot.n_stations
    if config.shadow_sigma_db == 0:
        return ShadowingField(np.ones((n, grid.n_pixels)))
    rng = np.random.default_rng(seed)
    fields = gaussian_fields(n, grid.side, grid.step, config.shadow_corr_km, rng)
    db = config.shadow_sigma_db * fields.reshape(n, -1)[:, grid.flat_index]
    return ShadowingField(10.0 ** (db / 10.0))


def snapshot_from_arrays(
    config: GeometryConfig,
    positions: Sequence,
    tiers: Sequence[int],
    shadowing: np.ndarray | None = None,
    seed=None,
) -> NetworkSnapshot:
    """Build a snapshot from explicit stations, e.g. for hand-made layouts.

    ``shadowing`` is a linear array ``(n_stations, n_pixels)``; ``None`` means no
    shadowing (all multipliers 1).
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    tiers = np.asarray(tiers, dtype=np.int64)
    if tiers.min(initial=1) < 1 or tiers.max(initial=1) > config.n_tiers:
        raise ValueError("tier labels must lie in 1..J")
    powers = config.powers_mw[tiers - 1]
    grid = _grid_for(config.sim_radius, config.grid_step)
    if shadowing is None:
        shadowing = np.ones((len(tiers), grid.n_pixels))
    shadowing = np.array(shadowing, dtype=float)
    if shadowing.shape != (len(tiers), grid.n_pixels):
        raise ValueError(f"shadowing must have shape {(len(tiers), grid.n_pixels)}")
    return NetworkSnapshot(config, positions, tiers, powers, grid, ShadowingField(shadowing), seed)


STATION_CSV_HEADER = ["id", "x_km", "y_km", "tier", "power_dbm"]


def write_station_csv(snapshot: NetworkSnapshot, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATION_CSV_HEADER)
        for i, (p, t, pw) in enumerate(zip(snapshot.positions, snapshot.tiers, snapshot.powers_mw)):
            writer.writerow([i, repr(float(p[0])), repr(float(p[1])), int(t), repr(mw_to_dbm(pw))])


def save_snapshot(snapshot: NetworkSnapshot, path):
    """Versioned binary dump (numpy ``.npz``) of positions, tiers, powers and shadowing."""
    shadow = snapshot.shadowing.values if snapshot.shadowing is not None else np.empty((0, 0))
    np.savez_compressed(
        path,
        format_version=SNAPSHOT_FORMAT_VERSION,
        positions=snapshot.positions,
        tiers=snapshot.tiers,
        powers_mw=snapshot.powers_mw,
        shadowing=shadow,
        seed=-1 if snapshot.seed is None else snapshot.seed,
    )


def load_snapshot(path, config: GeometryConfig) -> NetworkSnapshot:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != SNAPSHOT_FORMAT_VERSION:
            raise ValueError(f"unsupported snapshot format version {version}")
        shadow = data["shadowing"]
        seed = int(data["seed"])
        snap = snapshot_from_arrays(
            config, data["positions"], data["tiers"], shadow if shadow.size else None,
            None if seed < 0 else seed,
        )
    return snap
