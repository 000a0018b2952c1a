"""Two-vehicle car-following under attacked sensor fusion.

A deterministic, seedable simulator of one autonomous follower fusing four
noisy leader-speed sensors while an attacker injects bounded biases, plus the
adversarial Q-learning loop the two sides use to pick fusion weights and
injections, analytic oracles, and matrix-game solvers for validation.
"""

from .agents import (
    Experience,
    QLearner,
    ReplayMemory,
    TrainConfig,
    attack_action_grid,
    greedy_rollout,
    select_action,
    self_play,
    simplex_weight_grid,
    tabular_q_update,
    td_target,
)
from .attack import (
    AttackScenario,
    apply_attack,
    attacked_estimate,
    clamp_attack,
    validate_attack,
)
from .baseline import (
    FrozenPolicyAttacker,
    WorstCaseGridAttacker,
    ZeroAttacker,
    static_weight_rollout,
)
from .dynamics import (
    FollowConfig,
    compute_history_depth,
    discrete_speed_update,
    initial_spacing,
    safe_spacing,
    spacing_update,
    truncated_speed,
    warm_start_trajectory,
)
from .env import (
    CarFollowEnv,
    DeviationTracker,
    LeaderProcess,
    PlayerObservation,
    StepOutcome,
    deviation_direct,
    theta,
)
from .equilibria import (
    FictitiousPlayResult,
    best_response_gap,
    exact_msne_small,
    expected_payoff_matrix,
    fictitious_play,
)
from .errors import CheckpointError, ConfigError, NumericalError
from .lstm import LstmQNet, init_params, lstm_backward, lstm_forward, zero_params
from .sensing import (
    NoiseModel,
    fused_estimate,
    fused_noise_variance,
    inverse_variance_weights,
    measure,
    residual_cost,
    validate_weights,
    wls_estimate,
)

__version__ = "0.1.0"
