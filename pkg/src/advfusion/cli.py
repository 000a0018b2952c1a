"""Command-line front end: train, eval, baseline, oracle, plot.

Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 numerical failure.
Every error path prints one line starting with "error: <category>:".
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .agents import (
    QLearner,
    attack_action_grid,
    greedy_rollout,
    self_play,
    simplex_weight_grid,
)
from .baseline import (
    FrozenPolicyAttacker,
    WorstCaseGridAttacker,
    ZeroAttacker,
    static_weight_rollout,
)
from .config import ExperimentConfig, parse_overrides, resolve_config
from .equilibria import exact_msne_small, expected_payoff_matrix, fictitious_play
from .errors import CheckpointError, ConfigError, NumericalError
from .trace import (
    TraceWriter,
    load_checkpoint,
    read_trace,
    save_checkpoint,
    write_summary,
)

CHECKPOINT_NAME = "checkpoint.npz"


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="key=value config file")
    p.add_argument("--scenario", choices=["none", "beacon", "all"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--steps", type=int, default=None, help="steps per episode")
    p.add_argument("--out", type=str, default="out", help="output directory")
    p.add_argument(
        "--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (repeatable; wins over --config)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advfusion",
        description="Car-following sensor-fusion security experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="adversarial self-play training")
    _add_common(p_train)

    p_eval = sub.add_parser("eval", help="greedy rollout of a trained checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", type=str, required=True)

    p_base = sub.add_parser("baseline", help="static inverse-variance weights rollout")
    _add_common(p_base)
    p_base.add_argument(
        "--attacker", choices=["none", "worst", "checkpoint"], default="worst"
    )
    p_base.add_argument("--checkpoint", type=str, default=None)

    p_oracle = sub.add_parser("oracle", help="stage-game payoff matrix and solvers")
    _add_common(p_oracle)
    p_oracle.add_argument("--iterations", type=int, default=10_000)
    p_oracle.add_argument(
        "--matching-pennies", action="store_true",
        help="solve the 2x2 matching-pennies test matrix instead",
    )

    p_plot = sub.add_parser("plot", help="render charts from trace files")
    p_plot.add_argument("--trace", type=str, required=True)
    p_plot.add_argument("--compare", type=str, default=None, help="second trace to overlay")
    p_plot.add_argument("--out", type=str, default="out")
    return parser


def _resolve(args) -> ExperimentConfig:
    overrides = parse_overrides(args.sets)
    if args.scenario is not None:
        overrides["scenario"] = args.scenario
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "episodes", None) is not None:
        overrides["episodes"] = args.episodes
    if getattr(args, "steps", None) is not None:
        overrides["steps_per_episode"] = args.steps
    return resolve_config(args.config, overrides)


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_lock(cfg: ExperimentConfig, out: Path) -> None:
    (out / "config.lock").write_text(cfg.lock_text(), encoding="utf-8")


def _build_learners(cfg: ExperimentConfig) -> tuple[QLearner, QLearner, np.random.Generator]:
    tc = cfg.train_config()
    ss = np.random.SeedSequence(cfg.seed)
    env_seed, av_seed, att_seed = ss.spawn(3)
    env = cfg.build_env(seed=env_seed)
    av = QLearner(
        simplex_weight_grid(cfg.weight_resolution), env.window, tc,
        np.random.default_rng(av_seed), name="av",
    )
    att = QLearner(
        attack_action_grid(cfg.attack_scenario(), cfg.attack_levels), env.window, tc,
        np.random.default_rng(att_seed), name="attacker",
    )
    return env, av, att


def _window_stats(trace_path: Path, frac: float = 0.1) -> dict:
    t = read_trace(trace_path)
    n = len(t["step"])
    k = max(1, int(round(frac * n)))
    out = {
        "steps_total": n,
        "first_window_mean_regret": float(np.mean(t["regret"][:k])),
        "final_window_mean_regret": float(np.mean(t["regret"][-k:])),
        "final_window_mean_abs_dev_m": float(np.mean(t["spacing_dev_m"][-k:])),
        "final_window_mean_w_beacon": float(np.mean(t["w3"][-k:])),
        "steady_window_mean_abs_dev_m": float(np.mean(t["spacing_dev_m"][n // 2:])),
    }
    return out


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(args)
    _write_lock(cfg, out)
    env, av, att = _build_learners(cfg)
    tc = cfg.train_config()
    t0 = time.perf_counter()
    with TraceWriter(out / "trace.csv") as trace:
        history = self_play(env, av, att, tc, trace=trace)
    wall = time.perf_counter() - t0
    save_checkpoint(
        out / CHECKPOINT_NAME,
        av.net.state_dict(), att.net.state_dict(),
        av.actions, att.actions,
        meta={"config": cfg.to_dict(), "config_hash": cfg.digest(),
              "grid_signature": cfg.grid_signature()},
    )
    summary = {"mode": "train", "config_hash": cfg.digest(),
               "episodes": len(history.episodes), "wall_time_s": wall,
               "collisions": sum(1 for e in history.episodes if e.collision)}
    summary.update(_window_stats(out / "trace.csv"))
    write_summary(out / "summary.txt", summary)
    print(f"trained {len(history.episodes)} episodes -> {out}")
    return 0


def _restore_learners(cfg: ExperimentConfig, ckpt: dict) -> tuple:
    sig = ckpt["meta"].get("grid_signature", {})
    if sig != cfg.grid_signature():
        diffs = sorted(
            k for k in set(sig) | set(cfg.grid_signature())
            if sig.get(k) != cfg.grid_signature().get(k)
        )
        raise CheckpointError(
            f"checkpoint incompatible with requested config (mismatched: {', '.join(diffs)})"
        )
    env, av, att = _build_learners(cfg)
    av.net.load_state_dict(ckpt["av_state"])
    att.net.load_state_dict(ckpt["att_state"])
    if av.actions.shape != ckpt["av_actions"].shape or not np.allclose(av.actions, ckpt["av_actions"]):
        raise CheckpointError("checkpoint weight grid differs from configured grid")
    if att.actions.shape != ckpt["att_actions"].shape or not np.allclose(att.actions, ckpt["att_actions"]):
        raise CheckpointError("checkpoint attack grid differs from configured grid")
    return env, av, att


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(args)
    _write_lock(cfg, out)
    ckpt = load_checkpoint(args.checkpoint)
    env, av, att = _restore_learners(cfg, ckpt)
    t0 = time.perf_counter()
    with TraceWriter(out / "trace.csv") as trace:
        result = greedy_rollout(env, av, att, cfg.steps_per_episode, trace=trace)
    wall = time.perf_counter() - t0
    summary = {"mode": "eval", "config_hash": cfg.digest(),
               "mean_regret": result["mean_regret"],
               "mean_abs_dev_m": result["mean_abs_dev"],
               "collision": result["collision"], "wall_time_s": wall}
    summary.update(_window_stats(out / "trace.csv"))
    write_summary(out / "summary.txt", summary)
    print(f"eval {result['steps']} steps -> {out}")
    return 0


def cmd_baseline(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(args)
    _write_lock(cfg, out)
    env = cfg.build_env(seed=np.random.SeedSequence(cfg.seed).spawn(3)[0])
    if args.attacker == "none":
        attacker = ZeroAttacker()
    elif args.attacker == "worst":
        attacker = WorstCaseGridAttacker(env, cfg.attack_levels)
    else:
        if args.checkpoint is None:
            raise ConfigError("--attacker checkpoint requires --checkpoint PATH")
        ckpt = load_checkpoint(args.checkpoint)
        _, _, att = _restore_learners(cfg, ckpt)
        attacker = FrozenPolicyAttacker(att)
    t0 = time.perf_counter()
    with TraceWriter(out / "trace.csv") as trace:
        result = static_weight_rollout(env, attacker, steps=cfg.steps_per_episode, trace=trace)
    wall = time.perf_counter() - t0
    summary = {"mode": "baseline", "config_hash": cfg.digest(),
               "attacker": args.attacker,
               "mean_regret": result["mean_regret"],
               "mean_abs_dev_m": result["mean_abs_dev"],
               "collision": result["collision"], "wall_time_s": wall}
    summary.update(_window_stats(out / "trace.csv"))
    write_summary(out / "summary.txt", summary)
    print(f"baseline {result['steps']} steps -> {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(args)
    _write_lock(cfg, out)
    if args.matching_pennies:
        payoff = np.array([[1.0, -1.0], [-1.0, 1.0]])
    else:
        payoff = expected_payoff_matrix(
            simplex_weight_grid(cfg.weight_resolution),
            attack_action_grid(cfg.attack_scenario(), cfg.attack_levels),
            cfg.noise_model().sigma,
        )
    np.savetxt(out / "payoff.csv", payoff, delimiter=",", fmt="%.12g")
    fp = fictitious_play(payoff, iterations=args.iterations)
    with open(out / "fp_history.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,exploitability\n")
        for it, gap in fp.history:
            fh.write(f"{it},{gap:.12g}\n")
    report = {"mode": "oracle", "rows": payoff.shape[0], "cols": payoff.shape[1],
              "fp_value": fp.value, "fp_exploitability": fp.exploitability}
    if payoff.shape[0] <= 4 and payoff.shape[1] <= 4:
        x, y, v = exact_msne_small(payoff)
        report["exact_value"] = v
        np.savetxt(out / "exact_row_strategy.csv", x[None, :], delimiter=",", fmt="%.12g")
        np.savetxt(out / "exact_col_strategy.csv", y[None, :], delimiter=",", fmt="%.12g")
    np.savetxt(out / "fp_row_strategy.csv", fp.row_strategy[None, :], delimiter=",", fmt="%.12g")
    np.savetxt(out / "fp_col_strategy.csv", fp.col_strategy[None, :], delimiter=",", fmt="%.12g")
    write_summary(out / "summary.txt", report)
    print(f"oracle {payoff.shape[0]}x{payoff.shape[1]} game -> {out}")
    return 0


def cmd_plot(args) -> int:
    from . import plots  # deferred: pulls in matplotlib

    out = _prepare_out(args)
    trace = read_trace(args.trace)
    written = plots.render_trace_plots(trace, out)
    if args.compare is not None:
        other = read_trace(args.compare)
        written += plots.render_comparison(
            trace, other, (Path(args.trace).stem, Path(args.compare).stem), out
        )
    print("\n".join(str(p) for p in written))
    return 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
    "oracle": cmd_oracle,
    "plot": cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:  # includes CheckpointError
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, FloatingPointError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
