"""Discrete-time car-following dynamics for a two-vehicle string.

The follower adjusts its speed toward an estimate of the leader's speed with
sensitivity ``lam`` (1/s) sampled every ``T`` seconds:

    v(t+T) = lam*T * v_lead_est(t) + (1 - lam*T) * v(t)

Stability requires 0 < lam*T < 2.  Because the weight on old estimates decays
geometrically with ratio q = |1 - lam*T|, the speed is determined (to a chosen
tolerance) by a finite history of estimates; ``compute_history_depth`` returns
that depth.  All speeds are m/s, spacings are m.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_LAMBDA = 1.0
DEFAULT_T = 0.1
DEFAULT_EPS_TOL = 1e-3
DEFAULT_D_MIN = 2.0
DEFAULT_T_HEADWAY = 1.5
DEFAULT_V_MAX = 40.0
DEFAULT_NU = 20.0

# Samples the follower sits at rest before the update law engages.  This value
# makes the closed form in initial_spacing() the exact book-keeping of the
# cold-start trajectory: the accumulated gap opening is
# hold*T*nu + (nu/lam)*(q - q^n_over) which equals o(nu) - initial_spacing(nu)
# up to nu*q^history_depth/lam <= nu*eps_tol/lam (0.019 m at defaults).
ENGAGEMENT_HOLD = 3


def compute_history_depth(lam: float, T: float, eps_tol: float) -> int:
    """Smallest integer n >= 1 with |1 - lam*T|**n <= eps_tol.

    Returns 1 when lam*T == 1 (the update forgets history immediately).
    """
    if not 0.0 < lam * T < 2.0:
        raise ConfigError(f"lam*T={lam * T!r} outside the stable range (0, 2)")
    if not 0.0 < eps_tol < 1.0:
        raise ConfigError(f"eps_tol={eps_tol!r} must lie in (0, 1)")
    q = abs(1.0 - lam * T)
    if q == 0.0:
        return 1
    n = max(1, math.ceil(math.log(eps_tol) / math.log(q)))
    # guard against float slop on the boundary
    while q**n > eps_tol:
        n += 1
    while n > 1 and q ** (n - 1) <= eps_tol:
        n -= 1
    return n


@dataclass
class FollowConfig:
    """Parameters of the follower's update law and spacing policy.

    ``history_depth`` is derived, not user-set: the number of past estimates
    that matter at tolerance ``eps_tol``.
    """

    lam: float = DEFAULT_LAMBDA
    T: float = DEFAULT_T
    eps_tol: float = DEFAULT_EPS_TOL
    d_min: float = DEFAULT_D_MIN
    t_headway: float = DEFAULT_T_HEADWAY
    v_max: float = DEFAULT_V_MAX
    history_depth: int = field(init=False)

    def __post_init__(self) -> None:
        if self.T <= 0:
            raise ConfigError(f"T={self.T!r} must be positive")
        if not 0.0 < self.lam * self.T < 2.0:
            raise ConfigError(
                f"lam*T={self.lam * self.T!r} outside the stable range (0, 2)"
            )
        if self.v_max <= 0:
            raise ConfigError(f"v_max={self.v_max!r} must be positive")
        if self.d_min < 0 or self.t_headway < 0:
            raise ConfigError("d_min and t_headway must be nonnegative")
        self.history_depth = compute_history_depth(self.lam, self.T, self.eps_tol)

    @property
    def decay(self) -> float:
        """Geometric ratio q = 1 - lam*T applied to older estimates."""
        return 1.0 - self.lam * self.T


def discrete_speed_update(v: float, v_lead_est: float, cfg: FollowConfig) -> float:
    """One follower speed update, clamped to [0, v_max]."""
    v_next = cfg.lam * cfg.T * v_lead_est + (1.0 - cfg.lam * cfg.T) * v
    return min(max(v_next, 0.0), cfg.v_max)


def truncated_speed(est_history: np.ndarray, cfg: FollowConfig) -> float:
    """Follower speed reconstructed from the finite estimate history.

    ``est_history`` holds the last history_depth+1 leader-speed estimates,
    newest first.  Equals the recursive update up to eps_tol * max|estimate|.
    """
    est_history = np.asarray(est_history, dtype=float)
    n = cfg.history_depth
    if est_history.shape != (n + 1,):
        raise ValueError(
            f"est_history must have shape ({n + 1},), got {est_history.shape}"
        )
    lt = cfg.lam * cfg.T
    weights = lt * (1.0 - lt) ** np.arange(n + 1)
    return float(weights @ est_history)


def spacing_update(d: float, v_lead_next: float, v_next: float, T: float) -> float:
    """Bumper-to-bumper spacing after one sample period."""
    return d + T * (v_lead_next - v_next)


def safe_spacing(nu: float, cfg: FollowConfig) -> float:
    """Target spacing at cruise speed nu: constant time-headway policy."""
    if nu < 0:
        raise ValueError(f"nu={nu!r} must be nonnegative")
    return cfg.d_min + cfg.t_headway * nu


def initial_spacing(nu: float, cfg: FollowConfig) -> float:
    """Gap to leave when engaging behind a leader cruising at nu.

    Chosen so the spacing opened during the follower's spin-up lands on
    safe_spacing(nu).  May be negative for large nu / slow dynamics; that is
    reported, not clamped, since it flags an infeasible engagement speed.
    """
    n = cfg.history_depth
    lt = cfg.lam * cfg.T
    ramp = sum(1.0 - (1.0 - lt) ** p for p in range(n))
    d0 = safe_spacing(nu, cfg) - (n + 2) * cfg.T * nu + cfg.T * nu * ramp
    if d0 < 0:
        warnings.warn(
            f"initial_spacing({nu})={d0:.3f} m is negative; engagement at this "
            "speed cannot reach the safe gap",
            stacklevel=2,
        )
    return d0


def warm_start_trajectory(nu: float, cfg: FollowConfig, n_steps: int) -> np.ndarray:
    """Noise-free cold-start spacing trajectory d(0..n_steps).

    The follower starts at rest, holds for ENGAGEMENT_HOLD samples, then runs
    the speed update against exact leader-speed estimates.  The spacing
    converges to safe_spacing(nu) within nu*eps_tol/lam.
    """
    d = np.empty(n_steps + 1)
    d[0] = initial_spacing(nu, cfg)
    v = 0.0
    for m in range(1, n_steps + 1):
        if m > ENGAGEMENT_HOLD:
            v = discrete_speed_update(v, nu, cfg)
        d[m] = spacing_update(d[m - 1], nu, v, cfg.T)
    return d
