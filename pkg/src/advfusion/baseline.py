"""Fixed-weight baseline rollouts against frozen or worst-case attackers.

The baseline follower fuses with static inverse-variance weights (the
no-attack optimum) and never adapts.  Opponents: a frozen trained policy, a
myopic worst-case search over the attack grid, or no attack at all.
"""

from __future__ import annotations

import numpy as np

from .agents import QLearner, attack_action_grid
from .env import CarFollowEnv
from .sensing import N_SENSORS, inverse_variance_weights


class ZeroAttacker:
    """No injection."""

    def choose(self, obs, env: CarFollowEnv, w: np.ndarray) -> np.ndarray:
        return np.zeros(N_SENSORS)


class WorstCaseGridAttacker:
    """Exhaustive per-step maximizer of the next squared deviation.

    Knows the defender's fixed weights; picks the grid injection maximizing
    (delta + carry + w^T a)^2, the deterministic upper envelope of the next
    regret increment.
    """

    def __init__(self, env: CarFollowEnv, n_levels: int = 5) -> None:
        self.grid = attack_action_grid(env.scenario, n_levels)

    def choose(self, obs, env: CarFollowEnv, w: np.ndarray) -> np.ndarray:
        pending = env.delta + env.theta_carry()
        push = self.grid @ np.asarray(w, dtype=float)
        j = int(np.argmax((pending + push) ** 2))
        return self.grid[j]


class FrozenPolicyAttacker:
    """Greedy play from a trained attacker Q-network."""

    def __init__(self, learner: QLearner) -> None:
        self.learner = learner

    def choose(self, obs, env: CarFollowEnv, w: np.ndarray) -> np.ndarray:
        q = self.learner.q_values(obs)
        return self.learner.actions[int(np.argmax(q))]


def static_weight_rollout(
    env: CarFollowEnv,
    attacker,
    weights: np.ndarray | None = None,
    steps: int | None = None,
    trace=None,
    episode: int = 0,
) -> dict:
    """Run one episode with fixed fusion weights; returns summary arrays."""
    w = inverse_variance_weights(env.noise.sigma) if weights is None else np.asarray(weights)
    n = env.max_steps if steps is None else steps
    _, obs_att = env.reset()
    regrets, devs, a_rows = [], [], []
    for _ in range(n):
        a = attacker.choose(obs_att, env, w)
        outcome, _, obs_att = env.step(w, a)
        if trace is not None:
            trace.row(
                step=outcome.step,
                episode=episode,
                w=w,
                a=a,
                delta=outcome.delta,
                spacing=outcome.spacing,
                spacing_dev=outcome.spacing_dev,
                regret=outcome.regret,
                eps=0.0,
            )
        regrets.append(outcome.regret)
        devs.append(outcome.spacing_dev)
        a_rows.append(np.asarray(a, dtype=float))
        if outcome.done:
            break
    return {
        "weights": w,
        "steps": len(regrets),
        "mean_regret": float(np.mean(regrets)),
        "mean_abs_dev": float(np.mean(devs)),
        "regret": np.array(regrets),
        "spacing_dev": np.array(devs),
        "a": np.array(a_rows),
        "collision": env.collision,
    }
