"""Mean-cell approximation through the equivalent homogeneous network.

Seen from a fixed location, the marked propagation losses of the multi-tier
network form a Poisson process with intensity measure ``a_j t^(2/beta)``
per tier, ``a_j = pi E[S^(2/beta)] lambda_j P_j^(2/beta) / K^2``. The same
law is produced by a single-tier network of intensity ``lambda`` and power
``P = (sum_j lambda_j/lambda P_j^(2/beta))^(beta/2)`` whose stations get
i.i.d. labels ``j`` with probability ``a_j / a``.

The mean-cell load ``theta`` solves the scalar equation

    theta = (rho / lambda) E[ 1 / R( g* / (N + sum_j w_j(theta) I_j) ) ]

with ``g*`` the strongest received power at the origin, ``I_j`` the power
received from the other stations labelled ``j`` and
``w_j(theta) = min(theta c_j, 1)(1 - eps) + eps``, ``c_j = (P_j / P)^(2/beta)``.
The expectation is a Monte Carlo average over sampled networks that stay
fixed while ``theta`` is iterated, so the map is deterministic and monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryConfig
from .ratemodel import as_rate_model


def shadow_moment(sigma_db, beta):
    """``E[S^(2/beta)]`` for log-normal ``S`` with zero-mean dB and std ``sigma_db``."""
    if sigma_db < 0:
        raise ValueError("sigma_db must be >= 0")
    if math.isinf(beta):
        return 1.0
    s = (2.0 / beta) * sigma_db * math.log(10.0) / 10.0
    return math.exp(s * s / 2.0)


def shadow_mean(sigma_db):
    """``E[S]`` for the same log-normal law."""
    s = sigma_db * math.log(10.0) / 10.0
    return math.exp(s * s / 2.0)


def equivalent_power(config: GeometryConfig) -> float:
    """Power (mW) of the single-tier network with the same loss process."""
    b = config.pathloss_beta
    weights = config.intensities / config.intensity
    return float(np.sum(weights * config.powers_mw ** (2.0 / b)) ** (b / 2.0))


def tier_coefficients(config: GeometryConfig) -> np.ndarray:
    """``a_j`` per tier, in km^-2 (loss)^(-2/beta)."""
    b = config.pathloss_beta
    m = shadow_moment(config.shadow_sigma_db, b)
    return math.pi * m / config.pathloss_K ** 2 * config.intensities * config.powers_mw ** (2.0 / b)


def tier_selection_probability(config: GeometryConfig, j: int) -> float:
    """Probability that the station serving a fixed location is of tier ``j`` (1-based)."""
    if not 1 <= j <= config.n_tiers:
        raise ValueError(f"tier index {j} outside 1..{config.n_tiers}")
    a = tier_coefficients(config)
    return float(a[j - 1] / a.sum())


def load_ratios(config: GeometryConfig) -> np.ndarray:
    """``(P_j / P)^(2/beta)``: tier load (and traffic) relative to the network mean."""
    return (config.powers_mw / equivalent_power(config)) ** (2.0 / config.pathloss_beta)


@dataclass(frozen=True)
class EquivalentNetwork:
    power_mw: float
    coefficients: np.ndarray
    shadow_moment: float

    @property
    def a(self):
        return float(self.coefficients.sum())

    @property
    def selection_probabilities(self):
        return self.coefficients / self.coefficients.sum()

    @classmethod
    def of(cls, config: GeometryConfig):
        return cls(equivalent_power(config), tier_coefficients(config),
                   shadow_moment(config.shadow_sigma_db, config.pathloss_beta))


def min_loss_survival(config: GeometryConfig, t):
    """Survival function of the smallest propagation loss seen at a fixed point."""
    a = tier_coefficients(config).sum()
    return np.exp(-a * np.asarray(t, dtype=float) ** (2.0 / config.pathloss_beta))


@dataclass(frozen=True)
class TypicalUserSamples:
    """Per sampled network: strongest received power and per-label interference (mW).

    ``serving_label`` is the (1-based) label of the strongest station.
    """

    signal: np.ndarray
    interference: np.ndarray
    serving_label: np.ndarray

    def __post_init__(self):
        if self.interference.ndim != 2 or self.interference.shape[0] != len(self.signal):
            raise ValueError("interference must have shape (n_samples, n_tiers)")


def sample_typical_user(
    config: GeometryConfig,
    mc_samples: int,
    seed=0,
    network: str = "equivalent",
    tail_correction: bool = True,
) -> TypicalUserSamples:
    """Sample the received-power picture at the origin of a network in the sim disc.

    ``network="equivalent"`` draws the single-tier network of power ``P`` with
    artificial labels; ``"heterogeneous"`` draws the actual tiers. Stations
    beyond ``sim_radius`` are replaced by their mean contribution
    ``2 pi lambda_j E[S] P_j K^-beta R^(2-beta) / (beta - 2)`` per label.
    Shadowing at a single point only needs its marginal law.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if network not in ("equivalent", "heterogeneous"):
        raise ValueError(f"unknown network kind {network!r}")
    rng = np.random.default_rng(seed)
    J = config.n_tiers
    b, K, R = config.pathloss_beta, config.pathloss_K, config.sim_radius
    lam = config.intensity
    P = equivalent_power(config)
    probs_label = tier_coefficients(config)
    probs_label = probs_label / probs_label.sum()
    probs_tier = config.intensities / lam
    signal = np.empty(mc_samples)
    interference = np.zeros((mc_samples, J))
    labels = np.empty(mc_samples, dtype=np.int64)
    mean_count = lam * math.pi * R * R
    k = 0
    while k < mc_samples:
        n = rng.poisson(mean_count)
        if n == 0:
            continue
        r = R * np.sqrt(rng.random(n))
        s = 10.0 ** (config.shadow_sigma_db * rng.standard_normal(n) / 10.0)
        if network == "equivalent":
            lab = rng.choice(J, size=n, p=probs_label)
            power = P
        else:
            lab = rng.choice(J, size=n, p=probs_tier)
            power = config.powers_mw[lab]
        g = power * s / (K * r) ** b
        best = int(np.argmax(g))
        signal[k] = g[best]
        labels[k] = lab[best] + 1
        per_label = np.bincount(lab, weights=g, minlength=J)
        per_label[lab[best]] -= g[best]
        interference[k] = np.maximum(per_label, 0.0)
        k += 1
    if tail_correction:
        interference += tail_interference(config, network)
    return TypicalUserSamples(signal, interference, labels)


def tail_interference(config: GeometryConfig, network: str = "equivalent") -> np.ndarray:
    """Mean power per label received at the origin from stations beyond ``sim_radius``."""
    b, K, R = config.pathloss_beta, config.pathloss_K, config.sim_radius
    radial = 2.0 * math.pi * shadow_mean(config.shadow_sigma_db) * K ** (-b) * R ** (2.0 - b) / (b - 2.0)
    if network == "equivalent":
        a = tier_coefficients(config)
        return radial * config.intensity * equivalent_power(config) * a / a.sum()
    return radial * config.intensities * config.powers_mw


@dataclass(frozen=True)
class TierMeanCell:
    traffic_bps: float
    load: float
    critical_bps: float
    throughput_bps: float
    mean_users: float


@dataclass(frozen=True)
class MeanCellSolution:
    theta_tilde: float
    overall: TierMeanCell
    tiers: dict
    residual: float
    iterations: int
    converged: bool
    saturated: bool


def _mean_cell(traffic, load, critical_limit):
    critical = traffic / load if load > 0 else critical_limit
    throughput = max(critical - traffic, 0.0)
    users = traffic / throughput if throughput > 0 else math.inf
    return TierMeanCell(traffic, load, critical, throughput, users)


class MeanCellMap:
    """The scalar map ``theta -> (rho / lambda) E[1 / R(SINR(theta))]`` on fixed samples."""

    def __init__(self, config: GeometryConfig, samples: TypicalUserSamples, rate=None, pilot_eps=0.0):
        self.config = config
        self.samples = samples
        self.rate = as_rate_model(rate)
        self.pilot_eps = float(pilot_eps)
        self.ratios = load_ratios(config)

    def weights(self, theta):
        return np.minimum(theta * self.ratios, 1.0) * (1.0 - self.pilot_eps) + self.pilot_eps

    def mean_inverse_rate(self, theta):
        interf = self.samples.interference @ self.weights(theta)
        sinr = self.samples.signal / (self.config.noise_mw + interf)
        return float(np.mean(self.rate.inverse_rate(sinr)))

    def __call__(self, theta, rho_per_km2):
        return rho_per_km2 / self.config.intensity * self.mean_inverse_rate(theta)


def solve_mean_cell(
    config: GeometryConfig,
    rho_per_km2,
    rate=None,
    pilot_eps=0.0,
    mc_samples=4000,
    tol=1e-6,
    seed=0,
    max_iter=500,
    samples: TypicalUserSamples | None = None,
    network: str = "equivalent",
) -> MeanCellSolution:
    """Solve the mean-cell load equation by Picard iteration from 0.

    Pass ``samples`` to reuse one sample set across a traffic sweep (common
    random numbers); otherwise ``mc_samples`` networks are drawn from ``seed``.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if rho_per_km2 < 0:
        raise ValueError("rho must be >= 0")
    if samples is None:
        samples = sample_typical_user(config, mc_samples, seed, network)
    fmap = MeanCellMap(config, samples, rate, pilot_eps)
    theta = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = fmap(theta, rho_per_km2)
        change = abs(new - theta)
        theta = new
        if change < tol:
            converged = True
            break
    residual = abs(fmap(theta, rho_per_km2) - theta)
    critical_limit = 1.0 / fmap.mean_inverse_rate(theta)
    mean_traffic = rho_per_km2 / config.intensity
    overall = _mean_cell(mean_traffic, theta, critical_limit)
    tiers = {
        j + 1: _mean_cell(mean_traffic * c, theta * c, critical_limit)
        for j, c in enumerate(fmap.ratios)
    }
    return MeanCellSolution(theta, overall, tiers, residual, it, converged, theta >= 1.0)
