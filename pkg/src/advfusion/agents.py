"""Action grids, replay memory, and the two self-play Q-learners.

Both players discretize their continuous action sets: the follower picks
fusion weights from a simplex lattice, the attacker picks per-sensor injection
levels from a symmetric ladder.  Each learns an LSTM Q-function over a window
of its own past actions and the deviation signal, per-step, from a uniformly
sampled replay memory.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackScenario
from .env import CarFollowEnv, PlayerObservation
from .errors import ConfigError
from .lstm import LstmQNet
from .sensing import N_SENSORS


def simplex_weight_grid(resolution: int) -> np.ndarray:
    """All fusion-weight vectors with entries k/resolution summing to 1.

    resolution 4 gives the 35-point quarter lattice.  Lexicographic order.
    """
    if resolution < 1:
        raise ConfigError(f"weight resolution {resolution!r} must be >= 1")
    points = []
    for ks in itertools.product(range(resolution + 1), repeat=N_SENSORS):
        if sum(ks) == resolution:
            points.append([k / resolution for k in ks])
    return np.array(points)


def attack_action_grid(scenario: AttackScenario, n_levels: int = 5) -> np.ndarray:
    """Cartesian product of per-sensor ladders over the scenario's sensors.

    Each exposed sensor contributes n_levels symmetric levels spanning
    [-tau, +tau] (0 included); untouched sensors stay 0.  A scenario with no
    exposed sensors yields the single all-zero action.
    """
    if n_levels < 1 or n_levels % 2 == 0:
        raise ConfigError(f"attack levels {n_levels!r} must be odd and >= 1")
    mask = scenario.mask
    ladders = []
    for k in range(N_SENSORS):
        if mask[k] and scenario.tau[k] > 0.0:
            ladders.append(np.linspace(-scenario.tau[k], scenario.tau[k], n_levels))
        else:
            ladders.append(np.array([0.0]))
    grid = np.array(list(itertools.product(*ladders)))
    return grid


def select_action(q: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over Q-values; exact argmax ties break to lowest index."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps!r} outside [0, 1]")
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))


@dataclass(frozen=True)
class Experience:
    state: np.ndarray        # (window, features) at decision time
    action: int
    utility: float
    next_state: np.ndarray
    initial: bool            # first decision of an episode


class ReplayMemory:
    """FIFO buffer with uniform sampling."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ConfigError(f"replay capacity {capacity!r} must be >= 1")
        self.capacity = capacity
        self._buf: deque[Experience] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._buf)

    def push(self, exp: Experience) -> None:
        self._buf.append(exp)

    def sample(self, k: int, rng: np.random.Generator) -> list[Experience]:
        idx = rng.integers(len(self._buf), size=k)
        return [self._buf[int(i)] for i in idx]


def td_target(
    exp: Experience, gamma: float, net: LstmQNet, target_net: LstmQNet | None = None
) -> float:
    """Bootstrap target: bare utility on episode-initial samples, else
    utility + gamma * max_a' Q(next_state, a')."""
    if exp.initial:
        return exp.utility
    bootstrap_net = target_net if target_net is not None else net
    return exp.utility + gamma * float(np.max(bootstrap_net.q_values(exp.next_state)))


@dataclass
class TrainConfig:
    """Self-play hyperparameters.  eps_* control exploration annealing."""

    beta: float = 1e-3
    gamma: float = 0.95
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay: float = 0.9
    eps_decay_unit: str = "episode"
    episodes: int = 60
    steps_per_episode: int = 1000
    hidden_dim: int = 32
    replay_capacity: int = 10_000
    minibatch: int = 1
    grad_clip: float = 5.0
    target_refresh: int = 0
    plateau_window: int = 50
    plateau_patience: int = 100
    plateau_rel_change: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.beta:
            raise ConfigError(f"beta={self.beta!r} must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma={self.gamma!r} must lie in [0, 1)")
        for name in ("eps_start", "eps_end"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v!r} outside [0, 1]")
        if self.eps_end > self.eps_start:
            raise ConfigError("eps_end must not exceed eps_start")
        if not 0.0 < self.eps_decay <= 1.0:
            raise ConfigError(f"eps_decay={self.eps_decay!r} must lie in (0, 1]")
        if self.eps_decay_unit not in ("episode", "step"):
            raise ConfigError(f"eps_decay_unit must be 'episode' or 'step'")
        if self.episodes < 1 or self.steps_per_episode < 1:
            raise ConfigError("episodes and steps_per_episode must be >= 1")
        if self.minibatch < 1:
            raise ConfigError(f"minibatch={self.minibatch!r} must be >= 1")

    def eps_at(self, unit_index: int) -> float:
        return max(self.eps_end, self.eps_start * self.eps_decay**unit_index)


class QLearner:
    """One player: action grid, LSTM Q-net, replay, epsilon-greedy policy."""

    def __init__(
        self,
        actions: np.ndarray,
        window: int,
        cfg: TrainConfig,
        rng: np.random.Generator,
        name: str = "player",
    ) -> None:
        self.actions = np.asarray(actions, dtype=float)
        self.n_actions = self.actions.shape[0]
        self.window = window
        self.cfg = cfg
        self.rng = rng
        self.name = name
        input_dim = self.actions.shape[1] + 1
        self.net = LstmQNet(input_dim, cfg.hidden_dim, self.n_actions, rng)
        self.target_net = self.net.clone() if cfg.target_refresh > 0 else None
        self.memory = ReplayMemory(cfg.replay_capacity)
        self._updates = 0

    def q_values(self, obs: PlayerObservation) -> np.ndarray:
        return self.net.q_values(obs.features())

    def select(self, obs: PlayerObservation, eps: float) -> int:
        return select_action(self.q_values(obs), eps, self.rng)

    def store(
        self, obs: PlayerObservation, action: int, utility: float,
        next_obs: PlayerObservation, initial: bool,
    ) -> None:
        self.memory.push(
            Experience(obs.features(), action, utility, next_obs.features(), initial)
        )

    def _update_one(self, exp: Experience) -> float:
        # state and next_state share parameters, so one batched forward
        # covers both the prediction and the bootstrap when no target net
        if exp.initial or self.target_net is not None:
            q, h, cache = self.net.q_values_batch(exp.state[None], keep_cache=True)
            t = td_target(exp, self.cfg.gamma, self.net, self.target_net)
        else:
            q, h, cache = self.net.q_values_batch(
                np.stack([exp.state, exp.next_state]), keep_cache=True
            )
            t = exp.utility + self.cfg.gamma * float(np.max(q[1]))
        err = float(q[0, exp.action]) - t
        grads = self.net.grads_from_cache(cache, 0, h[0], exp.action, 2.0 * err)
        self.net.sgd_step(grads, self.cfg.beta, self.cfg.grad_clip)
        return err * err

    def train_step(self) -> float | None:
        """One sampled update; returns the mean squared TD error, or None if
        the memory is still empty."""
        if len(self.memory) == 0:
            return None
        batch = self.memory.sample(self.cfg.minibatch, self.rng)
        total = 0.0
        for exp in batch:
            total += self._update_one(exp)
        self._updates += 1
        if self.target_net is not None and self._updates % self.cfg.target_refresh == 0:
            self.target_net = self.net.clone()
        return total / len(batch)


def tabular_q_update(
    table: dict,
    state,
    action,
    utility: float,
    next_state,
    next_actions,
    beta: float,
    gamma: float,
    initial: bool = False,
) -> float:
    """Same TD rule on a dict table; oracle for the network learners."""
    if initial:
        target = utility
    else:
        target = utility + gamma * max(table.get((next_state, a), 0.0) for a in next_actions)
    old = table.get((state, action), 0.0)
    new = old + beta * (target - old)
    table[(state, action)] = new
    return new


@dataclass
class EpisodeRecord:
    episode: int
    steps: int
    eps: float
    mean_regret: float
    mean_abs_dev: float
    final_delta: float
    collision: bool


@dataclass
class TrainingHistory:
    episodes: list[EpisodeRecord] = field(default_factory=list)
    converged_at: int | None = None


def self_play(
    env: CarFollowEnv,
    av: QLearner,
    att: QLearner,
    cfg: TrainConfig,
    trace=None,
    stop_on_plateau: bool = False,
) -> TrainingHistory:
    """Simultaneous-move training loop.

    Per step both players pick epsilon-greedy actions, the environment
    advances, both store the (state, action, +/-regret, next state) experience
    and run one sampled update.  With ``stop_on_plateau`` the loop ends early
    once the moving average of episode regret stops changing.
    """
    history = TrainingHistory()
    regret_ma: deque[float] = deque(maxlen=cfg.plateau_window)
    last_ma: float | None = None
    steps_done = 0
    for ep in range(cfg.episodes):
        obs_av, obs_att = env.reset()
        regrets = []
        devs = []
        eps = cfg.eps_at(ep if cfg.eps_decay_unit == "episode" else steps_done)
        for step in range(cfg.steps_per_episode):
            if cfg.eps_decay_unit == "step":
                eps = cfg.eps_at(steps_done)
            ia = av.select(obs_av, eps)
            ja = att.select(obs_att, eps)
            outcome, next_av, next_att = env.step(av.actions[ia], att.actions[ja])
            av.store(obs_av, ia, outcome.u_av, next_av, initial=step == 0)
            att.store(obs_att, ja, outcome.u_att, next_att, initial=step == 0)
            av.train_step()
            att.train_step()
            if trace is not None:
                trace.row(
                    step=outcome.step,
                    episode=ep,
                    w=av.actions[ia],
                    a=att.actions[ja],
                    delta=outcome.delta,
                    spacing=outcome.spacing,
                    spacing_dev=outcome.spacing_dev,
                    regret=outcome.regret,
                    eps=eps,
                )
            obs_av, obs_att = next_av, next_att
            regrets.append(outcome.regret)
            devs.append(outcome.spacing_dev)
            steps_done += 1
            if outcome.done:
                break
        history.episodes.append(
            EpisodeRecord(
                episode=ep,
                steps=len(regrets),
                eps=eps,
                mean_regret=float(np.mean(regrets)),
                mean_abs_dev=float(np.mean(devs)),
                final_delta=env.delta,
                collision=env.collision,
            )
        )
        if stop_on_plateau:
            regret_ma.append(history.episodes[-1].mean_regret)
            if len(regret_ma) == cfg.plateau_window and ep >= cfg.plateau_patience:
                ma = float(np.mean(regret_ma))
                if last_ma is not None and abs(ma - last_ma) <= cfg.plateau_rel_change * max(
                    abs(last_ma), 1e-12
                ):
                    history.converged_at = ep
                    break
                last_ma = ma
    return history


def greedy_rollout(
    env: CarFollowEnv,
    av: QLearner,
    att: QLearner,
    steps: int,
    trace=None,
    episode: int = 0,
) -> dict:
    """One evaluation episode with eps = 0 and no learning."""
    obs_av, obs_att = env.reset()
    regrets, devs, w_rows, a_rows = [], [], [], []
    for _ in range(steps):
        ia = av.select(obs_av, 0.0)
        ja = att.select(obs_att, 0.0)
        outcome, obs_av, obs_att = env.step(av.actions[ia], att.actions[ja])
        if trace is not None:
            trace.row(
                step=outcome.step,
                episode=episode,
                w=av.actions[ia],
                a=att.actions[ja],
                delta=outcome.delta,
                spacing=outcome.spacing,
                spacing_dev=outcome.spacing_dev,
                regret=outcome.regret,
                eps=0.0,
            )
        regrets.append(outcome.regret)
        devs.append(outcome.spacing_dev)
        w_rows.append(av.actions[ia])
        a_rows.append(att.actions[ja])
        if outcome.done:
            break
    return {
        "steps": len(regrets),
        "mean_regret": float(np.mean(regrets)),
        "mean_abs_dev": float(np.mean(devs)),
        "regret": np.array(regrets),
        "spacing_dev": np.array(devs),
        "w": np.array(w_rows),
        "a": np.array(a_rows),
        "collision": env.collision,
    }
