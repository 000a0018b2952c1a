"""Multi-sensor leader-speed measurement and weighted fusion.

Four sensors observe the leader's speed: camera, radar, a transponder beacon,
and a received-signal-strength ranger.  Measurement model per sensor k:

    z_k = h_k * v_lead + e_k,   e_k ~ N(0, sigma_k^2), independent

Sensor order everywhere in this package is (camera, radar, beacon, rss); noise
draws consume the RNG in that order.  Fusion is a convex combination of the
measurements; the variance-optimal static weights are inverse-variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

SENSOR_NAMES = ("camera", "radar", "beacon", "rss")
N_SENSORS = 4

DEFAULT_SIGMA = (0.2, 0.4, 0.05, 0.8)

SIMPLEX_ATOL = 1e-9


@dataclass
class NoiseModel:
    """Per-sensor Gaussian noise levels (m/s) and observation gains."""

    sigma: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_SIGMA))
    gains: np.ndarray = field(default_factory=lambda: np.ones(N_SENSORS))

    def __post_init__(self) -> None:
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.gains = np.asarray(self.gains, dtype=float)
        if self.sigma.shape != (N_SENSORS,) or self.gains.shape != (N_SENSORS,):
            raise ConfigError("sigma and gains must each have 4 entries")
        if np.any(self.sigma < 0):
            raise ConfigError(f"negative sigma: {self.sigma}")
        if np.any(self.gains <= 0):
            raise ConfigError(f"gains must be positive: {self.gains}")


def measure(v_lead: float, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one measurement vector z (camera, radar, beacon, rss)."""
    e = rng.normal(0.0, 1.0, size=N_SENSORS) * noise.sigma
    return noise.gains * v_lead + e


def validate_weights(w: np.ndarray) -> np.ndarray:
    """Check w lies on the probability simplex (sum 1 within 1e-9, w_k >= 0)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (N_SENSORS,):
        raise ValueError(f"weights must have shape ({N_SENSORS},), got {w.shape}")
    if np.any(w < -SIMPLEX_ATOL):
        raise ValueError(f"negative fusion weight in {w}")
    s = float(w.sum())
    if abs(s - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"fusion weights sum to {s!r}, expected 1")
    return w


def fused_estimate(z: np.ndarray, w: np.ndarray) -> float:
    """Convex combination w^T z of the measurements."""
    z = np.asarray(z, dtype=float)
    w = validate_weights(w)
    return float(w @ z)


def residual_cost(z: np.ndarray, v_hat: float, weight_matrix: np.ndarray) -> float:
    """Weighted squared residual (z - h*v_hat)^T W (z - h*v_hat), unit gains."""
    z = np.asarray(z, dtype=float)
    r = z - v_hat
    return float(r @ np.asarray(weight_matrix, dtype=float) @ r)


def wls_estimate(z: np.ndarray, gains: np.ndarray, weight_matrix: np.ndarray) -> float:
    """Weighted least-squares scalar estimate (h^T W h)^-1 h^T W z."""
    z = np.asarray(z, dtype=float)
    h = np.asarray(gains, dtype=float)
    W = np.asarray(weight_matrix, dtype=float)
    denom = float(h @ W @ h)
    if denom <= 0.0:
        raise ValueError("gains/weight matrix give a non-positive normal equation")
    return float(h @ W @ z) / denom


def inverse_variance_weights(sigma: np.ndarray) -> np.ndarray:
    """Simplex weights minimizing fused noise variance: w_k ∝ 1/sigma_k^2.

    A zero-sigma sensor is noiseless; all mass goes to the first such sensor.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (N_SENSORS,):
        raise ValueError(f"sigma must have shape ({N_SENSORS},), got {sigma.shape}")
    if np.any(sigma < 0):
        raise ValueError(f"negative sigma: {sigma}")
    w = np.zeros(N_SENSORS)
    zero = sigma == 0.0
    if np.any(zero):
        w[int(np.argmax(zero))] = 1.0
        return w
    inv = 1.0 / sigma**2
    return inv / inv.sum()


def fused_noise_variance(w: np.ndarray, sigma: np.ndarray) -> float:
    """Variance of w^T e for independent zero-mean noise: sum w_k^2 sigma_k^2."""
    w = np.asarray(w, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return float(np.sum(w**2 * sigma**2))
