"""Two-player episode environment: fusion-weight chooser vs. injector.

Each step: the leader's speed is drawn, sensors measure it, the injection is
added, the follower fuses the corrupted measurements and updates its speed,
and the spacing integrates the speed difference.  The scalar
term(m) = w^T e + w^T a is the estimate error introduced at step m; its
geometrically weighted accumulation

    theta(n) = sum_{l=0..min(depth, n)} q^l * term(n-l)
    delta(n) = delta(n-1) + theta(n)

measures how far the spacing has been pushed off its nominal trajectory:
spacing deviation in meters is lam*T^2*|delta|, and the zero-sum payoff is
regret = lam^2*T^4*delta^2 (attacker +, follower -).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackScenario, apply_attack
from .dynamics import (
    ENGAGEMENT_HOLD,
    FollowConfig,
    discrete_speed_update,
    initial_spacing,
    spacing_update,
)
from .errors import ConfigError
from .sensing import N_SENSORS, NoiseModel, measure, validate_weights

DEFAULT_MAX_STEPS = 1000


def theta(terms_newest_first: np.ndarray, decay: float, history_depth: int) -> float:
    """Weighted sum of recent terms: sum_l q^l * term(n-l), l <= history_depth."""
    t = np.asarray(terms_newest_first, dtype=float)
    k = min(history_depth + 1, t.shape[0])
    return float(decay ** np.arange(k) @ t[:k])


def deviation_direct(terms: np.ndarray, decay: float, history_depth: int) -> float:
    """O(n * depth) reference: delta(n) = sum_p sum_{l<=min(depth,p)} q^l term(p-l).

    ``terms`` is ordered oldest first.  Test oracle for DeviationTracker.
    """
    terms = np.asarray(terms, dtype=float)
    total = 0.0
    for p in range(terms.shape[0]):
        for l in range(min(history_depth, p) + 1):
            total += decay**l * terms[p - l]
    return total


class DeviationTracker:
    """Incremental delta via a ring buffer of the last history_depth+1 terms."""

    def __init__(self, decay: float, history_depth: int) -> None:
        self.decay = decay
        self.history_depth = history_depth
        self._weights = decay ** np.arange(history_depth + 1)
        self.reset()

    def reset(self) -> None:
        self.delta = 0.0
        self._buffer: deque[float] = deque(maxlen=self.history_depth + 1)

    def carry(self) -> float:
        """Deterministic part of the next theta: sum_{l>=1} q^l * term(n-l)."""
        if not self._buffer:
            return 0.0
        # the oldest of history_depth+1 stored terms ages out of the next theta
        k = min(len(self._buffer), self.history_depth)
        past = np.fromiter(
            reversed(self._buffer), dtype=float, count=len(self._buffer)
        )[:k]
        return float(self._weights[1 : k + 1] @ past)

    def update(self, term: float) -> float:
        """Record one term, advance delta, return theta(n)."""
        self._buffer.append(term)
        newest_first = np.fromiter(
            reversed(self._buffer), dtype=float, count=len(self._buffer)
        )
        th = float(self._weights[: newest_first.shape[0]] @ newest_first)
        self.delta += th
        return th


@dataclass
class LeaderProcess:
    """Leader speed source: constant nu plus optional Gaussian perturbation."""

    nu: float = 20.0
    sigma_lead: float = 0.0

    def __post_init__(self) -> None:
        if self.nu < 0:
            raise ConfigError(f"nu={self.nu!r} must be nonnegative")
        if self.sigma_lead < 0:
            raise ConfigError(f"sigma_lead={self.sigma_lead!r} must be nonnegative")

    def draw(self, rng: np.random.Generator, v_max: float) -> float:
        v = self.nu
        if self.sigma_lead > 0.0:
            v += self.sigma_lead * rng.normal()
        return min(max(v, 0.0), v_max)


@dataclass(frozen=True)
class StepOutcome:
    step: int
    v_lead: float
    v: float
    spacing: float
    term: float
    theta: float
    delta: float
    spacing_dev: float
    regret: float
    u_av: float
    u_att: float
    collision: bool
    done: bool


@dataclass(frozen=True)
class PlayerObservation:
    """What one player sees: its own last `window` actions and deviations.

    Rows are ordered oldest first; zero-padded until enough steps exist.
    The deviation entries are in meters (lam*T^2 * delta).
    """

    actions: np.ndarray
    deviations: np.ndarray

    def features(self) -> np.ndarray:
        """(window, action_dim + 1) input sequence for a recurrent net."""
        return np.concatenate([self.actions, self.deviations[:, None]], axis=1)


class CarFollowEnv:
    """Seeded episode environment; both players act simultaneously each step."""

    def __init__(
        self,
        follow: FollowConfig | None = None,
        noise: NoiseModel | None = None,
        scenario: AttackScenario | None = None,
        leader: LeaderProcess | None = None,
        max_steps: int = DEFAULT_MAX_STEPS,
        seed: int = 0,
        window: int | None = None,
        warmup_hold: int = ENGAGEMENT_HOLD,
        attack_mode: str = "strict",
    ) -> None:
        self.follow = follow or FollowConfig()
        self.noise = noise or NoiseModel()
        self.scenario = scenario or AttackScenario()
        self.leader = leader or LeaderProcess()
        if max_steps < 1:
            raise ConfigError(f"max_steps={max_steps!r} must be >= 1")
        if warmup_hold < 0:
            raise ConfigError(f"warmup_hold={warmup_hold!r} must be >= 0")
        self.max_steps = max_steps
        self.window = self.follow.history_depth if window is None else int(window)
        if self.window < 1:
            raise ConfigError(f"window={self.window!r} must be >= 1")
        self.warmup_hold = warmup_hold
        self.attack_mode = attack_mode
        self._seed = seed
        self._rng = np.random.default_rng(seed)
        self._dev_scale = self.follow.lam * self.follow.T**2
        self._tracker = DeviationTracker(self.follow.decay, self.follow.history_depth)
        self._needs_reset = True

    def reset(self, seed: int | None = None) -> tuple[PlayerObservation, PlayerObservation]:
        """Start an episode: leader at cruise, follower engaging from rest."""
        if seed is not None:
            self._seed = seed
            self._rng = np.random.default_rng(seed)
        self.step_count = 0
        self.v_lead = self.leader.nu
        self.v = 0.0
        self.spacing = initial_spacing(self.leader.nu, self.follow)
        self._tracker.reset()
        self.collision = False
        self.clamp_events = 0
        self._w_hist = np.zeros((self.window, N_SENSORS))
        self._a_hist = np.zeros((self.window, N_SENSORS))
        self._dev_hist = np.zeros(self.window)
        self._needs_reset = False
        return self._observe_av(), self._observe_att()

    def _observe_av(self) -> PlayerObservation:
        return PlayerObservation(self._w_hist.copy(), self._dev_hist.copy())

    def _observe_att(self) -> PlayerObservation:
        return PlayerObservation(self._a_hist.copy(), self._dev_hist.copy())

    @property
    def delta(self) -> float:
        return self._tracker.delta

    def theta_carry(self) -> float:
        """Known part of the next theta (used by myopic worst-case opponents)."""
        return self._tracker.carry()

    def step(
        self, w: np.ndarray, a: np.ndarray
    ) -> tuple[StepOutcome, PlayerObservation, PlayerObservation]:
        if self._needs_reset:
            raise RuntimeError("call reset() before step()")
        w = validate_weights(w)
        self.step_count += 1
        m = self.step_count

        v_lead = self.leader.draw(self._rng, self.follow.v_max)
        z = measure(v_lead, self.noise, self._rng)
        z_tilde = apply_attack(z, a, self.scenario, mode=self.attack_mode)
        est = float(w @ z_tilde)

        engaged = m > self.warmup_hold
        if engaged:
            v_prev = self.v
            self.v = discrete_speed_update(v_prev, est, self.follow)
            unclamped = (
                self.follow.lam * self.follow.T * est
                + (1.0 - self.follow.lam * self.follow.T) * v_prev
            )
            if self.v != unclamped:
                self.clamp_events += 1
        self.v_lead = v_lead
        self.spacing = spacing_update(self.spacing, v_lead, self.v, self.follow.T)

        if engaged:
            # estimate error actually fed into the speed update
            term = est - v_lead
            th = self._tracker.update(term)
        else:
            term = 0.0
            th = 0.0
        delta = self._tracker.delta
        spacing_dev = self._dev_scale * abs(delta)
        regret = (self.follow.lam * self.follow.T**2 * delta) ** 2

        self.collision = self.spacing <= 0.0
        done = self.collision or m >= self.max_steps
        self._needs_reset = done

        self._w_hist = np.roll(self._w_hist, -1, axis=0)
        self._w_hist[-1] = w
        self._a_hist = np.roll(self._a_hist, -1, axis=0)
        self._a_hist[-1] = np.asarray(a, dtype=float)
        self._dev_hist = np.roll(self._dev_hist, -1)
        self._dev_hist[-1] = self._dev_scale * delta

        outcome = StepOutcome(
            step=m,
            v_lead=v_lead,
            v=self.v,
            spacing=self.spacing,
            term=term,
            theta=th,
            delta=delta,
            spacing_dev=spacing_dev,
            regret=regret,
            u_av=-regret,
            u_att=regret,
            collision=self.collision,
            done=done,
        )
        return outcome, self._observe_av(), self._observe_att()
