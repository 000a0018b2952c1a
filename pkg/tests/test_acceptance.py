"""End-to-end acceptance suite: ten numbered checks, one verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every scorecard
line; without ``-s`` pytest only replays the lines of failing checks.  The
two training fixtures run the real train command at the default budget and
are shared across checks 7-9, so the whole module takes roughly ten minutes
on one core.

Checks 7(b) and 8 assert decay/plateau properties of the adversarial
training outcome that the implemented dynamics do not actually deliver (see
each test's comment for the measured behavior); they are kept as-is rather
than loosened, so a red result there is the recorded, explained state of
affairs and not a regression marker.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from advfusion.agents import (
    QLearner,
    greedy_rollout,
    simplex_weight_grid,
    tabular_q_update,
)
from advfusion.attack import AttackScenario
from advfusion.baseline import FrozenPolicyAttacker, static_weight_rollout
from advfusion.cli import main as cli_main
from advfusion.config import ExperimentConfig
from advfusion.dynamics import FollowConfig, compute_history_depth, safe_spacing
from advfusion.env import CarFollowEnv, DeviationTracker, LeaderProcess, deviation_direct
from advfusion.equilibria import exact_msne_small, fictitious_play
from advfusion.lstm import LstmQNet
from advfusion.sensing import DEFAULT_SIGMA, NoiseModel, inverse_variance_weights
from advfusion.trace import load_checkpoint, read_trace


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} ({detail})")


def run_cli(*argv):
    return subprocess.run(
        [sys.executable, "-m", "advfusion.cli", *argv],
        capture_output=True,
        text=True,
        timeout=600,
    )


def train_in_process(out, scenario: str) -> float:
    t0 = time.perf_counter()
    rc = cli_main(["train", "--scenario", scenario, "--seed", "0", "--out", str(out)])
    wall = time.perf_counter() - t0
    assert rc == 0
    return wall


@pytest.fixture(scope="session")
def beacon_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("beacon_train")
    return {"out": out, "wall": train_in_process(out, "beacon")}


@pytest.fixture(scope="session")
def all_sensor_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("all_train")
    return {"out": out, "wall": train_in_process(out, "all")}


def load_pair(run_dir, cfg: ExperimentConfig) -> tuple[QLearner, QLearner]:
    ck = load_checkpoint(run_dir / "checkpoint.npz")
    tc = cfg.train_config()
    window = cfg.build_env().window
    av = QLearner(ck["av_actions"], window, tc, np.random.default_rng(0), name="av")
    att = QLearner(ck["att_actions"], window, tc, np.random.default_rng(1), name="att")
    av.net.load_state_dict(ck["av_state"])
    att.net.load_state_dict(ck["att_state"])
    return av, att


def test_01_history_depth():
    got = compute_history_depth(1.0, 0.1, 0.001)
    reps = 1000
    t0 = time.perf_counter()
    for _ in range(reps):
        compute_history_depth(1.0, 0.1, 0.001)
    per_call = (time.perf_counter() - t0) / reps
    ok = got == 66 and per_call < 1e-3
    verdict(1, ok, f"depth={got}, {per_call * 1e6:.1f} us/call")
    assert ok


def test_02_warm_start_convergence():
    t0 = time.perf_counter()
    cfg = FollowConfig()
    env = CarFollowEnv(
        follow=cfg,
        noise=NoiseModel(sigma=(0.0, 0.0, 0.0, 0.0)),
        scenario=AttackScenario("none"),
        leader=LeaderProcess(nu=20.0, sigma_lead=0.0),
        seed=0,
        max_steps=1000,
    )
    env.reset()
    target = safe_spacing(20.0, cfg)
    w = np.full(4, 0.25)
    gaps = []
    for _ in range(1000):
        outcome, _, _ = env.step(w, np.zeros(4))
        if outcome.step >= cfg.history_depth:
            gaps.append(abs(outcome.spacing - target))
    elapsed = time.perf_counter() - t0
    worst = max(gaps)
    ok = worst <= 0.05 and elapsed < 1.0
    verdict(2, ok, f"max |d - o| = {worst:.4f} m on steps 66..1000, {elapsed:.2f} s")
    assert ok


def test_03_deviation_machinery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(123)
    worst_rel = 0.0
    for _ in range(100):
        terms = rng.normal(size=200)
        tracker = DeviationTracker(0.9, 66)
        tracker.reset()
        for t in terms:
            tracker.update(float(t))
        ref = deviation_direct(terms, 0.9, 66)
        worst_rel = max(worst_rel, abs(tracker.delta - ref) / max(abs(ref), 1e-12))

    # the same random-drive regime through the simulator: measured spacing
    # offset versus the scaled accumulated deviation
    env = CarFollowEnv(
        scenario=AttackScenario("beacon_only"),
        leader=LeaderProcess(nu=20.0, sigma_lead=0.0),
        seed=0,
        max_steps=200,
    )
    target = safe_spacing(20.0, env.follow)
    tau = env.scenario.tau
    mask = np.array(env.scenario.mask, dtype=float)
    W = simplex_weight_grid(4)
    worst_gap = 0.0
    depth = env.follow.history_depth
    for trial in range(100):
        env.reset(seed=trial)
        for _ in range(200):
            w = W[rng.integers(len(W))]
            a = rng.uniform(-tau, tau) * mask
            outcome, _, _ = env.step(w, a)
            if outcome.step >= depth:  # past the engagement transient
                worst_gap = max(
                    worst_gap, abs(abs(outcome.spacing - target) - outcome.spacing_dev)
                )
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-9 and worst_gap <= 0.05 and elapsed < 10.0
    verdict(
        3,
        ok,
        f"recursion vs direct rel err {worst_rel:.2e}; "
        f"|d - o| vs scaled delta gap {worst_gap:.4f} m; {elapsed:.1f} s",
    )
    assert ok


def test_04_lstm_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(5):
        d = int(rng.integers(2, 6))
        nh = int(rng.integers(3, 10))
        na = int(rng.integers(2, 6))
        net = LstmQNet(d, nh, na, rng)
        seq = rng.normal(size=(int(rng.integers(3, 12)), d))
        action = int(rng.integers(na))
        target = float(rng.normal())
        _, grads = net.loss_and_grads(seq, action, target)
        eps = 1e-6
        for k, g in grads.items():
            flat = net.params[k].ravel()
            for i in rng.choice(flat.size, size=min(6, flat.size), replace=False):
                old = flat[i]
                flat[i] = old + eps
                lp, _ = net.loss_and_grads(seq, action, target)
                flat[i] = old - eps
                lm, _ = net.loss_and_grads(seq, action, target)
                flat[i] = old
                fd = (lp - lm) / (2 * eps)
                an = g.ravel()[i]
                worst = max(worst, abs(fd - an) / max(1.0, abs(fd), abs(an)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 30.0
    verdict(4, ok, f"max rel err {worst:.2e} over 5 configs, {elapsed:.1f} s")
    assert ok


def test_05_tabular_q_fixed_point():
    gamma = 0.9
    trans = {(0, 0): (0, 0.0), (0, 1): (1, 1.0), (1, 0): (0, 2.0), (1, 1): (1, 0.0)}
    v = np.zeros(2)
    for _ in range(2000):
        v = np.array(
            [
                max(trans[(s, a)][1] + gamma * v[trans[(s, a)][0]] for a in (0, 1))
                for s in (0, 1)
            ]
        )
    q_star = {
        (s, a): trans[(s, a)][1] + gamma * v[trans[(s, a)][0]]
        for s in (0, 1)
        for a in (0, 1)
    }
    table: dict = {}
    rng = np.random.default_rng(0)
    s = 0
    for _ in range(10_000):
        a = int(rng.integers(2))
        s2, r = trans[(s, a)]
        tabular_q_update(table, s, a, r, s2, (0, 1), beta=1.0, gamma=gamma)
        s = s2
    worst = max(abs(table[k] - q_star[k]) for k in q_star)
    ok = worst <= 1e-6
    verdict(5, ok, f"max |Q - Q*| = {worst:.2e} after 1e4 updates")
    assert ok


def _simplex_grid_3(step: float) -> np.ndarray:
    k = round(1.0 / step)
    ij = np.array([(i, j) for i in range(k + 1) for j in range(k + 1 - i)])
    x = np.empty((len(ij), 3))
    x[:, 0] = ij[:, 0] / k
    x[:, 1] = ij[:, 1] / k
    x[:, 2] = 1.0 - x[:, 0] - x[:, 1]
    return x


def test_06_equilibrium_oracle():
    pennies = np.array([[1.0, -1.0], [-1.0, 1.0]])
    fp = fictitious_play(pennies, iterations=10_000)
    x_err = float(np.max(np.abs(fp.row_strategy - 0.5)))
    y_err = float(np.max(np.abs(fp.col_strategy - 0.5)))
    v_err = abs(fp.value)
    fp_ok = x_err <= 0.02 and y_err <= 0.02 and v_err <= 0.02

    # grid cross-check of the support-enumeration solver: no mixture on a
    # step-1e-3 simplex grid may beat the claimed value on either side
    grid = _simplex_grid_3(1e-3)
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(20):
        M = rng.normal(size=(3, 3))
        _, _, v = exact_msne_small(M)
        row_best = float((grid @ M).max(axis=1).min())  # grid minimizer
        col_best = float((M @ grid.T).min(axis=0).max())  # grid maximizer
        worst = max(worst, v - row_best, col_best - v)
    grid_ok = worst <= 1e-9
    ok = fp_ok and grid_ok
    verdict(
        6,
        ok,
        f"pennies strategy err {max(x_err, y_err):.4f}, value err {v_err:.4f}; "
        f"grid-vs-exact worst envelope violation {worst:.2e}",
    )
    assert ok


def test_07_beacon_training_trend(beacon_run):
    # (b) is the stochastic decay claim; with the pinned 0.05 exploration
    # floor the trained attacker's coherent beacon pushes keep accumulating
    # through the residual random weights, so the final-window regret stays
    # well above a quarter of the first window and this check stays red.
    trace = read_trace(beacon_run["out"] / "trace.csv")
    n = len(trace["step"])
    k = max(1, round(0.1 * n))
    wb_final = float(np.mean(trace["w3"][-k:]))
    wb_static = inverse_variance_weights(DEFAULT_SIGMA)[2]
    first = float(np.mean(trace["regret"][:k]))
    final = float(np.mean(trace["regret"][-k:]))
    ok_a = wb_final < wb_static
    ok_b = final <= 0.25 * first
    ok = ok_a and ok_b and beacon_run["wall"] <= 600.0
    verdict(
        7,
        ok,
        f"(a) final w_beacon {wb_final:.3f} vs static {wb_static:.3f} "
        f"{'PASS' if ok_a else 'FAIL'}; "
        f"(b) regret final/first {final:.3f}/{first:.3f} = {final / first:.2f} "
        f"vs 0.25 {'PASS' if ok_b else 'FAIL'}; train {beacon_run['wall']:.0f} s",
    )
    assert ok


def test_08_all_sensor_plateau(all_sensor_run):
    # With every channel attackable, any simplex weight passes at least
    # min tau = 0.5 m/s of coherent injection, so when the attacker trains
    # coherent the frozen pair drifts to collision (slope ratios 1-3); when
    # it trains incoherent the rollout hovers at noise level and both half
    # slopes are ~0, leaving their ratio ill-conditioned near 1.  Neither
    # mode shows the rise-then-flatten shape, so this check stays red.
    cfg = ExperimentConfig(scenario="all", seed=0)
    av, att = load_pair(all_sensor_run["out"], cfg)
    env = cfg.build_env(max_steps=1000)
    res = greedy_rollout(env, av, att, 1000)
    dev = res["spacing_dev"]
    h = len(dev) // 2
    s1 = float(np.polyfit(np.arange(h), dev[:h], 1)[0])
    s2 = float(np.polyfit(np.arange(h, len(dev)), dev[h:], 1)[0])
    ratio = abs(s2) / max(abs(s1), 1e-12)
    ok = ratio <= 0.1
    verdict(
        8,
        ok,
        f"dev slope first half {s1:.2e}, final half {s2:.2e}, ratio {ratio:.2f} "
        f"vs 0.1; rollout {len(dev)} steps"
        + (", collision" if res["collision"] else ""),
    )
    assert ok


def test_09_trained_beats_static_baseline(beacon_run):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(scenario="beacon", seed=0)
    av, att = load_pair(beacon_run["out"], cfg)
    wins = 0
    rows = []
    for s in (1, 2, 3, 4, 5):
        rt = greedy_rollout(cfg.build_env(seed=s), av, att, 1000)
        rb = static_weight_rollout(
            cfg.build_env(seed=s), FrozenPolicyAttacker(att), steps=1000
        )
        dt = rt["spacing_dev"]
        db = rb["spacing_dev"]
        st = float(np.mean(dt[len(dt) // 2 :]))
        sb = float(np.mean(db[len(db) // 2 :]))
        wins += st < sb
        rows.append(f"{st:.2f}<{sb:.2f}" if st < sb else f"{st:.2f}>={sb:.2f}")
    total = beacon_run["wall"] + (time.perf_counter() - t0)
    ok = wins >= 4 and total <= 900.0
    verdict(
        9,
        ok,
        f"steady |dev| trained vs static (m): {', '.join(rows)}; "
        f"{wins}/5 wins; {total:.0f} s incl. training",
    )
    assert ok


def test_10_byte_identical_reruns(tmp_path):
    tiny = ["--scenario", "beacon", "--seed", "0", "--episodes", "2", "--steps", "40"]
    pairs = []
    for i in (1, 2):
        out = tmp_path / f"train{i}"
        res = run_cli("train", *tiny, "--out", str(out))
        assert res.returncode == 0, res.stderr
        pairs.append((out / "trace.csv").read_bytes())
    train_same = pairs[0] == pairs[1]

    ckpt = str(tmp_path / "train1" / "checkpoint.npz")
    evals = []
    for i in (1, 2):
        out = tmp_path / f"eval{i}"
        res = run_cli("eval", *tiny, "--checkpoint", ckpt, "--out", str(out))
        assert res.returncode == 0, res.stderr
        evals.append((out / "trace.csv").read_bytes())
    eval_same = evals[0] == evals[1]

    bases = []
    for i in (1, 2):
        out = tmp_path / f"base{i}"
        res = run_cli("baseline", *tiny, "--attacker", "worst", "--out", str(out))
        assert res.returncode == 0, res.stderr
        bases.append((out / "trace.csv").read_bytes())
    base_same = bases[0] == bases[1]

    ok = train_same and eval_same and base_same
    verdict(
        10,
        ok,
        f"train rerun identical: {train_same}; eval: {eval_same}; baseline: {base_same}",
    )
    assert ok
