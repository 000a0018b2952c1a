"""Matrix-game views of the one-step interaction, and two solvers.

The stage payoff to the attacker for weight row w and injection column a is
the expected squared error term E[(w^T a + w^T e)^2] = (w^T a)^2 + sum_k
w_k^2 sigma_k^2.  Rows (the follower) minimize, columns (the attacker)
maximize.  ``fictitious_play`` converges in time-average for such zero-sum
games; ``exact_msne_small`` solves games up to 4x4 exactly by support
enumeration and is used to validate the learning loop on small grids.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .sensing import fused_noise_variance


def expected_payoff_matrix(
    weight_grid: np.ndarray, attack_grid: np.ndarray, sigma: np.ndarray
) -> np.ndarray:
    """Expected one-step squared-term payoff for every grid pair."""
    W = np.asarray(weight_grid, dtype=float)
    A = np.asarray(attack_grid, dtype=float)
    bias2 = (W @ A.T) ** 2
    noise = np.array([fused_noise_variance(w, sigma) for w in W])
    return bias2 + noise[:, None]


def best_response_gap(payoff: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Duality gap: best attacker deviation payoff minus best follower's.

    Zero (within tolerance) exactly at an equilibrium.
    """
    M = np.asarray(payoff, dtype=float)
    return float(np.max(x @ M) - np.min(M @ y))


@dataclass
class FictitiousPlayResult:
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    value: float
    exploitability: float
    history: list[tuple[int, float]] = field(default_factory=list)


def fictitious_play(
    payoff: np.ndarray, iterations: int = 10_000, log_every: int = 100
) -> FictitiousPlayResult:
    """Simultaneous best response against the opponent's empirical mixture.

    Counts start uniform at 1; ties break to the lowest index.  The reported
    value is the average of the two best-response payoffs; exploitability is
    the duality gap, logged every ``log_every`` iterations.
    """
    M = np.asarray(payoff, dtype=float)
    n_rows, n_cols = M.shape
    row_counts = np.ones(n_rows)
    col_counts = np.ones(n_cols)
    history: list[tuple[int, float]] = []
    for it in range(1, iterations + 1):
        x = row_counts / row_counts.sum()
        y = col_counts / col_counts.sum()
        br_row = int(np.argmin(M @ y))
        br_col = int(np.argmax(x @ M))
        row_counts[br_row] += 1.0
        col_counts[br_col] += 1.0
        if it % log_every == 0 or it == iterations:
            xs = row_counts / row_counts.sum()
            ys = col_counts / col_counts.sum()
            history.append((it, best_response_gap(M, xs, ys)))
    x = row_counts / row_counts.sum()
    y = col_counts / col_counts.sum()
    value = 0.5 * (float(np.min(M @ y)) + float(np.max(x @ M)))
    return FictitiousPlayResult(x, y, value, best_response_gap(M, x, y), history)


def _strategy_from_support(
    M: np.ndarray, rows: tuple[int, ...], cols: tuple[int, ...], side: str
) -> tuple[np.ndarray, float] | None:
    """Solve the indifference system for one side's mixture on a support.

    side 'col': find y on `cols` making every row in `rows` payoff-equal (= v).
    side 'row': find x on `rows` making every column in `cols` payoff-equal.
    Returns (full-length strategy, v), or None if insoluble/infeasible.
    """
    if side == "col":
        sub = M[np.ix_(rows, cols)]
    else:
        sub = M[np.ix_(rows, cols)].T
    k_eq, k_var = sub.shape
    # unknowns: mixture (k_var) and common value v
    A = np.zeros((k_eq + 1, k_var + 1))
    A[:k_eq, :k_var] = sub
    A[:k_eq, k_var] = -1.0
    A[k_eq, :k_var] = 1.0
    rhs = np.zeros(k_eq + 1)
    rhs[k_eq] = 1.0
    sol, residual, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if not np.all(np.isfinite(sol)):
        return None
    if np.linalg.norm(A @ sol - rhs) > 1e-9:
        return None
    mix = sol[:k_var]
    if np.any(mix < -1e-9):
        return None
    mix = np.clip(mix, 0.0, None)
    total = mix.sum()
    if total <= 0.0:
        return None
    mix = mix / total
    full = np.zeros(M.shape[1] if side == "col" else M.shape[0])
    idx = cols if side == "col" else rows
    full[list(idx)] = mix
    return full, float(sol[k_var])


def exact_msne_small(payoff: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, float]:
    """Mixed equilibrium of a zero-sum matrix game up to 4x4.

    Enumerates supports smallest first, solves the indifference systems, and
    accepts only support pairs that survive an exact best-response check: no
    pure deviation may gain more than ``tol``.
    """
    M = np.asarray(payoff, dtype=float)
    n_rows, n_cols = M.shape
    if n_rows > 4 or n_cols > 4:
        raise ValueError(f"exact solver limited to 4x4 games, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericalError("payoff matrix contains non-finite entries")
    supports_r = [
        s for size in range(1, n_rows + 1) for s in itertools.combinations(range(n_rows), size)
    ]
    supports_c = [
        s for size in range(1, n_cols + 1) for s in itertools.combinations(range(n_cols), size)
    ]
    pairs = sorted(
        itertools.product(supports_r, supports_c),
        key=lambda rc: (max(len(rc[0]), len(rc[1])), len(rc[0]) + len(rc[1])),
    )
    for rows, cols in pairs:
        col_side = _strategy_from_support(M, rows, cols, "col")
        if col_side is None:
            continue
        row_side = _strategy_from_support(M, rows, cols, "row")
        if row_side is None:
            continue
        y, v_col = col_side
        x, v_row = row_side
        if abs(v_col - v_row) > max(10 * tol, 1e-8):
            continue
        v = 0.5 * (v_col + v_row)
        # best-response check: rows minimize, columns maximize
        if np.min(M @ y) < v - tol:
            continue
        if np.max(x @ M) > v + tol:
            continue
        return x, y, v
    raise NumericalError("no equilibrium found by support enumeration")
