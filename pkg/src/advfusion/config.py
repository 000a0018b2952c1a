"""Flat key=value experiment configuration with override precedence.

Precedence: built-in defaults < config file < --set/flag overrides.  Unknown
keys are rejected.  The resolved configuration is echoed to config.lock and
hashed into checkpoints so evaluation can refuse incompatible grids.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

import numpy as np

from .agents import TrainConfig
from .attack import DEFAULT_TAU, AttackScenario
from .dynamics import (
    DEFAULT_D_MIN,
    DEFAULT_EPS_TOL,
    DEFAULT_LAMBDA,
    DEFAULT_NU,
    DEFAULT_T,
    DEFAULT_T_HEADWAY,
    DEFAULT_V_MAX,
    ENGAGEMENT_HOLD,
    FollowConfig,
)
from .env import CarFollowEnv, LeaderProcess
from .errors import ConfigError
from .sensing import DEFAULT_SIGMA, NoiseModel

SCENARIO_ALIASES = {"none": "none", "beacon": "beacon_only", "beacon_only": "beacon_only", "all": "all"}


@dataclass
class ExperimentConfig:
    scenario: str = "none"
    lam: float = DEFAULT_LAMBDA
    T: float = DEFAULT_T
    eps_tol: float = DEFAULT_EPS_TOL
    d_min: float = DEFAULT_D_MIN
    t_headway: float = DEFAULT_T_HEADWAY
    v_max: float = DEFAULT_V_MAX
    nu: float = DEFAULT_NU
    sigma_lead: float = 0.0
    sigma_camera: float = DEFAULT_SIGMA[0]
    sigma_radar: float = DEFAULT_SIGMA[1]
    sigma_beacon: float = DEFAULT_SIGMA[2]
    sigma_rss: float = DEFAULT_SIGMA[3]
    tau_camera: float = DEFAULT_TAU[0]
    tau_radar: float = DEFAULT_TAU[1]
    tau_beacon: float = DEFAULT_TAU[2]
    tau_rss: float = DEFAULT_TAU[3]
    weight_resolution: int = 4
    attack_levels: int = 5
    window: int = 0  # 0 -> follow.history_depth
    warmup_hold: int = ENGAGEMENT_HOLD
    episodes: int = 60
    steps_per_episode: int = 1000
    beta: float = 1e-3
    gamma: float = 0.95
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay: float = 0.9
    eps_decay_unit: str = "episode"
    hidden_dim: int = 32
    replay_capacity: int = 10_000
    minibatch: int = 1
    grad_clip: float = 5.0
    target_refresh: int = 0
    seed: int = 0

    # keys that must match between a checkpoint and an evaluation run
    GRID_KEYS = (
        "scenario", "weight_resolution", "attack_levels", "hidden_dim", "window",
        "tau_camera", "tau_radar", "tau_beacon", "tau_rss",
        "lam", "T", "eps_tol",
    )

    def __post_init__(self) -> None:
        self.scenario = _canonical_scenario(self.scenario)
        # delegate numeric validation to the component configs
        self.follow_config()
        self.noise_model()
        self.attack_scenario()
        self.train_config()

    def follow_config(self) -> FollowConfig:
        return FollowConfig(
            lam=self.lam, T=self.T, eps_tol=self.eps_tol,
            d_min=self.d_min, t_headway=self.t_headway, v_max=self.v_max,
        )

    def noise_model(self) -> NoiseModel:
        return NoiseModel(
            sigma=np.array(
                [self.sigma_camera, self.sigma_radar, self.sigma_beacon, self.sigma_rss]
            )
        )

    def attack_scenario(self) -> AttackScenario:
        return AttackScenario(
            name=self.scenario,
            tau=np.array([self.tau_camera, self.tau_radar, self.tau_beacon, self.tau_rss]),
        )

    def leader(self) -> LeaderProcess:
        return LeaderProcess(nu=self.nu, sigma_lead=self.sigma_lead)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            beta=self.beta, gamma=self.gamma,
            eps_start=self.eps_start, eps_end=self.eps_end,
            eps_decay=self.eps_decay, eps_decay_unit=self.eps_decay_unit,
            episodes=self.episodes, steps_per_episode=self.steps_per_episode,
            hidden_dim=self.hidden_dim, replay_capacity=self.replay_capacity,
            minibatch=self.minibatch, grad_clip=self.grad_clip,
            target_refresh=self.target_refresh, seed=self.seed,
        )

    def build_env(self, seed: int | None = None, max_steps: int | None = None) -> CarFollowEnv:
        return CarFollowEnv(
            follow=self.follow_config(),
            noise=self.noise_model(),
            scenario=self.attack_scenario(),
            leader=self.leader(),
            max_steps=self.steps_per_episode if max_steps is None else max_steps,
            seed=self.seed if seed is None else seed,
            window=None if self.window == 0 else self.window,
            warmup_hold=self.warmup_hold,
        )

    def to_dict(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = _format_value(v)
        return out

    def lock_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in sorted(self.to_dict().items()))

    def digest(self) -> str:
        return hashlib.sha256(self.lock_text().encode()).hexdigest()

    def grid_signature(self) -> dict[str, str]:
        d = self.to_dict()
        return {k: d[k] for k in self.GRID_KEYS}


def _canonical_scenario(name: str) -> str:
    try:
        return SCENARIO_ALIASES[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; expected one of none, beacon, all"
        ) from None


def _format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    t = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if t == "float":
            return float(raw)
        if t == "int":
            return int(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {t}") from None
    return raw


def parse_config_file(path: str) -> dict:
    """Read a flat key=value file; '#' starts a comment, blank lines skipped."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line.rstrip()!r}")
            key, raw = stripped.split("=", 1)
            key = key.strip()
            values[key] = _parse_value(key, raw)
    return values


def parse_overrides(pairs: list[str]) -> dict:
    values = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = _parse_value(key.strip(), raw)
    return values


def resolve_config(
    file_path: str | None = None, overrides: dict | None = None
) -> ExperimentConfig:
    merged: dict = {}
    if file_path is not None:
        merged.update(parse_config_file(file_path))
    if overrides:
        for k, v in overrides.items():
            if k not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {k!r}")
            merged[k] = v
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
