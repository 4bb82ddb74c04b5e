"""Path loss, shadowed propagation loss and load-weighted SINR.

Propagation loss ``L = (K d)^beta / (P S)``; larger means a weaker signal.
Distances below half a pixel are clamped to ``grid_step / 2`` so a pixel that
contains its station still sees a finite loss.
"""

from __future__ import annotations

import functools

import numpy as np

from .geometry import BaseStation, NetworkSnapshot


def path_loss(distance_km, K, beta, min_distance=0.0):
    """Distance-dependent loss ``(K d)^beta`` with ``d`` clamped below at ``min_distance``."""
    d = np.maximum(np.asarray(distance_km, dtype=float), min_distance)
    out = (K * d) ** beta
    return float(out) if out.ndim == 0 else out


def propagation_loss(distance_km, power_mw, shadowing, K, beta, min_distance=0.0):
    """Linear propagation loss ``l(d) / (P S)``.

    Raises ``ValueError`` when a zero distance is not resolved by ``min_distance``.
    """
    d = np.asarray(distance_km, dtype=float)
    if min_distance <= 0 and np.any(d == 0):
        raise ValueError("pixel coincides with a station; set min_distance to cap the path loss")
    out = path_loss(d, K, beta, min_distance) / (np.asarray(power_mw) * np.asarray(shadowing))
    return float(out) if np.ndim(out) == 0 else out


def station_loss(bs: BaseStation, pixel: int, snapshot: NetworkSnapshot) -> float:
    """Propagation loss from one station to one grid pixel of ``snapshot``."""
    cfg = snapshot.config
    d = float(np.hypot(*(np.asarray(bs.position) - snapshot.grid.centers[pixel])))
    s = snapshot.shadowing.at(bs.id, pixel) if snapshot.shadowing is not None else 1.0
    return propagation_loss(d, bs.power_mw, s, cfg.pathloss_K, cfg.pathloss_beta, cfg.grid_step / 2)


def loss_matrix(snapshot: NetworkSnapshot) -> np.ndarray:
    """Propagation losses for every (station, pixel) pair, shape ``(n_stations, n_pixels)``."""
    cfg = snapshot.config
    shadow = 1.0 if snapshot.shadowing is None else snapshot.shadowing.values
    return propagation_loss(
        snapshot.distances(), snapshot.powers_mw[:, None], shadow,
        cfg.pathloss_K, cfg.pathloss_beta, cfg.grid_step / 2,
    )


@functools.lru_cache(maxsize=4)
def _cached_gains(snapshot):
    gains = 1.0 / loss_matrix(snapshot)
    gains.setflags(write=False)
    return gains


def gain_table(snapshot: NetworkSnapshot) -> np.ndarray:
    """Received power per unit activity, ``1 / L``; built once per snapshot, read-only."""
    return _cached_gains(snapshot)


def interference_weights(activity, pilot_eps=0.0):
    """Interference weight ``min(phi, 1) (1 - eps) + eps`` per station."""
    phi = np.minimum(np.maximum(np.asarray(activity, dtype=float), 0.0), 1.0)
    return phi * (1.0 - pilot_eps) + pilot_eps


def sinr(pixel: int, serving: int, snapshot: NetworkSnapshot, activity, pilot_eps=0.0) -> float:
    """Load-weighted SINR at one pixel from ``serving``.

    Each other station ``Y`` interferes with weight ``min(phi_Y, 1)(1 - eps) + eps``;
    the serving signal is unweighted.
    """
    gains = gain_table(snapshot)[:, pixel]
    w = interference_weights(activity, pilot_eps)
    mask = np.ones(len(gains), dtype=bool)
    mask[serving] = False
    interference = float(np.dot(w[mask], gains[mask]))
    return float(gains[serving] / (snapshot.config.noise_mw + interference))


def sinr_field(gains, serving, weights, noise_mw, offcell_gains=None):
    """SINR at every pixel given its serving station index.

    ``gains`` is ``(n_stations, n_pixels)``. ``offcell_gains`` may pass the
    same table with each pixel's serving entry zeroed (saves recomputing it).
    """
    cols = np.arange(gains.shape[1])
    signal = gains[serving, cols]
    if offcell_gains is None:
        offcell_gains = gains.copy()
        offcell_gains[serving, cols] = 0.0
    interference = np.asarray(weights, dtype=float) @ offcell_gains
    return signal / (noise_mw + interference)
