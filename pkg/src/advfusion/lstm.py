"""Single-layer LSTM with a linear Q-value head, trained by exact BPTT.

Gate layout in the stacked parameter blocks is (input, forget, output,
candidate) so the three sigmoid gates occupy one contiguous slice.  The
recurrence over a sequence x_1..x_n with h_0 = c_0 = 0:

    pre_t = Wx x_t + Wh h_{t-1} + b              (4H,)
    i, f, o = sigmoid(pre[:3H]),  g = tanh(pre[3H:])
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)
    q   = Wo h_n + bo                            (n_actions,)

All math is float64 numpy; forward supports a batch of sequences and the
backward pass accumulates the weight gradients as two matrix products.  The
backward pass is checked against central finite differences in the tests.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form: stable for any magnitude, no branching
    return 0.5 * np.tanh(0.5 * x) + 0.5


def init_params(
    input_dim: int, hidden_dim: int, n_actions: int, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    """Uniform fan-in scaled init; forget-gate bias starts at 1."""
    kx = 1.0 / np.sqrt(input_dim)
    kh = 1.0 / np.sqrt(hidden_dim)
    p = {
        "wx": rng.uniform(-kx, kx, size=(4 * hidden_dim, input_dim)),
        "wh": rng.uniform(-kh, kh, size=(4 * hidden_dim, hidden_dim)),
        "b": np.zeros(4 * hidden_dim),
        "wo": rng.uniform(-kh, kh, size=(n_actions, hidden_dim)),
        "bo": np.zeros(n_actions),
    }
    p["b"][hidden_dim : 2 * hidden_dim] = 1.0
    return p


def zero_params(input_dim: int, hidden_dim: int, n_actions: int) -> dict[str, np.ndarray]:
    p = init_params(input_dim, hidden_dim, n_actions, np.random.default_rng(0))
    return {k: np.zeros_like(v) for k, v in p.items()}


def lstm_forward_batch(
    seqs: np.ndarray, params: dict[str, np.ndarray], keep_cache: bool = False
):
    """Run the recurrence on (batch, n, input_dim); returns (batch, hidden).

    With ``keep_cache`` also returns the per-step activations needed by
    ``lstm_backward``.
    """
    seqs = np.asarray(seqs, dtype=float)
    if seqs.ndim != 3:
        raise ValueError(f"expected (batch, steps, features), got {seqs.shape}")
    bsz, n, _ = seqs.shape
    nh = params["wh"].shape[1]
    wht = params["wh"].T
    # input contribution for every step at once
    xp = seqs @ params["wx"].T + params["b"]
    h = np.zeros((bsz, nh))
    c = np.zeros((bsz, nh))
    cache = None
    if keep_cache:
        cache = {
            "seqs": seqs,
            "gates": np.empty((n, bsz, 4 * nh)),
            "c": np.empty((n, bsz, nh)),
            "tc": np.empty((n, bsz, nh)),
            "h_prev": np.empty((n, bsz, nh)),
        }
    for t in range(n):
        pre = xp[:, t, :] + h @ wht
        sig = _sigmoid(pre[:, : 3 * nh])
        i = sig[:, :nh]
        f = sig[:, nh : 2 * nh]
        o = sig[:, 2 * nh :]
        g = np.tanh(pre[:, 3 * nh :])
        if keep_cache:
            cache["h_prev"][t] = h
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        if keep_cache:
            cache["gates"][t, :, : 3 * nh] = sig
            cache["gates"][t, :, 3 * nh :] = g
            cache["c"][t] = c
            cache["tc"][t] = tc
    if keep_cache:
        return h, cache
    return h


def lstm_forward(seq: np.ndarray, params: dict[str, np.ndarray], keep_cache: bool = False):
    """Single-sequence convenience wrapper around the batch recurrence."""
    seq = np.asarray(seq, dtype=float)
    if keep_cache:
        h, cache = lstm_forward_batch(seq[None], params, keep_cache=True)
        return h[0], cache
    return lstm_forward_batch(seq[None], params)[0]


def lstm_backward(
    cache: dict, params: dict[str, np.ndarray], dh_final: np.ndarray, batch_index: int = 0
) -> dict[str, np.ndarray]:
    """Exact BPTT: gradients of a scalar loss wrt wx, wh, b given dL/dh_n."""
    seq = cache["seqs"][batch_index]
    n = seq.shape[0]
    nh = params["wh"].shape[1]
    gates = cache["gates"][:, batch_index, :]
    cs = cache["c"][:, batch_index, :]
    tcs = cache["tc"][:, batch_index, :]
    h_prevs = cache["h_prev"][:, batch_index, :]

    dpre_all = np.empty((n, 4 * nh))
    dh = np.asarray(dh_final, dtype=float).copy()
    dc = np.zeros(nh)
    for t in range(n - 1, -1, -1):
        i = gates[t, :nh]
        f = gates[t, nh : 2 * nh]
        o = gates[t, 2 * nh : 3 * nh]
        g = gates[t, 3 * nh :]
        tc = tcs[t]
        c_prev = cs[t - 1] if t > 0 else np.zeros(nh)

        do = dh * tc
        dc = dc + dh * o * (1.0 - tc**2)
        row = dpre_all[t]
        row[:nh] = dc * g * i * (1.0 - i)
        row[nh : 2 * nh] = dc * c_prev * f * (1.0 - f)
        row[2 * nh : 3 * nh] = do * o * (1.0 - o)
        row[3 * nh :] = dc * i * (1.0 - g**2)

        dh = params["wh"].T @ row
        dc = dc * f
    return {
        "wx": dpre_all.T @ seq,
        "wh": dpre_all.T @ h_prevs,
        "b": dpre_all.sum(axis=0),
    }


class LstmQNet:
    """Q-network: LSTM over an observation window, affine head over actions."""

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int,
        n_actions: int,
        rng: np.random.Generator | None = None,
        params: dict[str, np.ndarray] | None = None,
    ) -> None:
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.n_actions = n_actions
        if params is not None:
            self.params = {k: np.asarray(v, dtype=float).copy() for k, v in params.items()}
        else:
            self.params = init_params(
                input_dim, hidden_dim, n_actions, rng or np.random.default_rng(0)
            )

    def q_values(self, seq: np.ndarray) -> np.ndarray:
        h = lstm_forward(seq, self.params)
        return self.params["wo"] @ h + self.params["bo"]

    def q_values_batch(self, seqs: np.ndarray, keep_cache: bool = False):
        if keep_cache:
            h, cache = lstm_forward_batch(seqs, self.params, keep_cache=True)
            return h @ self.params["wo"].T + self.params["bo"], h, cache
        h = lstm_forward_batch(seqs, self.params)
        return h @ self.params["wo"].T + self.params["bo"]

    def grads_from_cache(
        self, cache: dict, batch_index: int, h_final: np.ndarray, action: int, dq: float
    ) -> dict[str, np.ndarray]:
        """Gradients of dq * Q[action] through head and recurrence."""
        grads = lstm_backward(
            cache, self.params, dq * self.params["wo"][action], batch_index
        )
        gwo = np.zeros_like(self.params["wo"])
        gwo[action] = dq * h_final
        gbo = np.zeros_like(self.params["bo"])
        gbo[action] = dq
        grads["wo"] = gwo
        grads["bo"] = gbo
        return grads

    def loss_and_grads(
        self, seq: np.ndarray, action: int, target: float
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Squared TD error on one (sequence, action, target) sample."""
        q, h, cache = self.q_values_batch(np.asarray(seq, dtype=float)[None], keep_cache=True)
        err = float(q[0, action]) - target
        grads = self.grads_from_cache(cache, 0, h[0], action, 2.0 * err)
        return err * err, grads

    def sgd_step(
        self, grads: dict[str, np.ndarray], beta: float, grad_clip: float = 0.0
    ) -> None:
        """Plain gradient descent; optional global-norm clipping when clip > 0."""
        if grad_clip > 0.0:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if norm > grad_clip:
                scale = grad_clip / norm
                grads = {k: g * scale for k, g in grads.items()}
        for k, g in grads.items():
            self.params[k] -= beta * g

    def clone(self) -> "LstmQNet":
        return LstmQNet(
            self.input_dim, self.hidden_dim, self.n_actions, params=self.params
        )

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k in self.params:
            v = np.asarray(state[k], dtype=float)
            if v.shape != self.params[k].shape:
                raise ValueError(f"parameter {k!r}: shape {v.shape} != {self.params[k].shape}")
            self.params[k] = v.copy()
