"""Bounded additive injection on the sensor measurements.

The attacker adds a vector a to the measurement vector z, limited per sensor
by |a_k| <= tau_k and restricted to the sensors a scenario exposes.  Order
matches sensing.SENSOR_NAMES.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .sensing import N_SENSORS, SENSOR_NAMES

DEFAULT_TAU = (0.5, 1.0, 1.0, 1.5)

SCENARIO_MASKS = {
    "none": (False, False, False, False),
    "beacon_only": (False, False, True, False),
    "all": (True, True, True, True),
}

BOUND_ATOL = 1e-12


@dataclass
class AttackScenario:
    """Which sensors may be injected and how hard (m/s per sensor)."""

    name: str = "none"
    tau: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_TAU))

    def __post_init__(self) -> None:
        if self.name not in SCENARIO_MASKS:
            raise ConfigError(
                f"unknown scenario {self.name!r}; expected one of "
                f"{sorted(SCENARIO_MASKS)}"
            )
        self.tau = np.asarray(self.tau, dtype=float)
        if self.tau.shape != (N_SENSORS,):
            raise ConfigError("tau must have 4 entries")
        if np.any(self.tau < 0):
            raise ConfigError(f"negative tau: {self.tau}")

    @property
    def mask(self) -> tuple[bool, ...]:
        return SCENARIO_MASKS[self.name]

    def bounds(self) -> np.ndarray:
        """Effective per-sensor bound: tau on exposed sensors, 0 elsewhere."""
        return np.where(self.mask, self.tau, 0.0)


def validate_attack(a: np.ndarray, scenario: AttackScenario) -> np.ndarray:
    """Reject an injection outside the scenario's bounds, naming the sensor."""
    a = np.asarray(a, dtype=float)
    if a.shape != (N_SENSORS,):
        raise ValueError(f"attack must have shape ({N_SENSORS},), got {a.shape}")
    bounds = scenario.bounds()
    over = np.abs(a) > bounds + BOUND_ATOL
    if np.any(over):
        k = int(np.argmax(over))
        raise ValueError(
            f"attack {a[k]!r} on sensor {SENSOR_NAMES[k]!r} exceeds bound "
            f"{bounds[k]!r} (scenario {scenario.name!r})"
        )
    return a


def clamp_attack(a: np.ndarray, scenario: AttackScenario) -> np.ndarray:
    """Project an injection onto the scenario's bounds instead of rejecting."""
    a = np.asarray(a, dtype=float)
    if a.shape != (N_SENSORS,):
        raise ValueError(f"attack must have shape ({N_SENSORS},), got {a.shape}")
    bounds = scenario.bounds()
    return np.clip(a, -bounds, bounds)


def apply_attack(
    z: np.ndarray, a: np.ndarray, scenario: AttackScenario, mode: str = "strict"
) -> np.ndarray:
    """Return the corrupted measurement z + a.

    mode 'strict' rejects infeasible injections (used for learner actions,
    whose grids are feasible by construction); 'clamp' projects them.
    """
    if mode == "strict":
        a = validate_attack(a, scenario)
    elif mode == "clamp":
        a = clamp_attack(a, scenario)
    else:
        raise ConfigError(f"unknown attack mode {mode!r}")
    return np.asarray(z, dtype=float) + a


def attacked_estimate(v_lead: float, w: np.ndarray, e: np.ndarray, a: np.ndarray) -> float:
    """Fused estimate under attack: v_lead + w^T e + w^T a (unit gains)."""
    w = np.asarray(w, dtype=float)
    return float(v_lead + w @ np.asarray(e, dtype=float) + w @ np.asarray(a, dtype=float))
