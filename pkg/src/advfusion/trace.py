"""Step-level CSV traces, run summaries, and checkpoints.

The trace schema is versioned through the literal header below; a golden test
asserts it.  Floats are written with a fixed %.12g so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ConfigError

TRACE_HEADER = (
    "step,episode,w1,w2,w3,w4,a1,a2,a3,a4,delta,spacing_m,spacing_dev_m,regret,eps_explore"
)
TRACE_COLUMNS = TRACE_HEADER.split(",")
CHECKPOINT_VERSION = 1


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


class TraceWriter:
    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self._fh.write(TRACE_HEADER + "\n")

    def row(self, step, episode, w, a, delta, spacing, spacing_dev, regret, eps) -> None:
        parts = [str(int(step)), str(int(episode))]
        parts += [_fmt(x) for x in w]
        parts += [_fmt(x) for x in a]
        parts += [_fmt(delta), _fmt(spacing), _fmt(spacing_dev), _fmt(regret), _fmt(eps)]
        self._fh.write(",".join(parts) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_trace(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a trace file; malformed content raises ConfigError with the line."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise ConfigError(f"{path}:1: unrecognized trace header {header!r}")
        columns: list[list[float]] = [[] for _ in TRACE_COLUMNS]
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(TRACE_COLUMNS):
                raise ConfigError(
                    f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(parts)}"
                )
            try:
                for col, raw in zip(columns, parts):
                    col.append(float(raw))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
    return {name: np.array(vals) for name, vals in zip(TRACE_COLUMNS, columns)}


def write_summary(path: str | Path, values: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in values.items():
            if isinstance(v, float):
                fh.write(f"{k}={v:.12g}\n")
            else:
                fh.write(f"{k}={v}\n")


def read_summary(path: str | Path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and "=" in line:
                k, v = line.split("=", 1)
                out[k] = v
    return out


def save_checkpoint(
    path: str | Path,
    av_state: dict[str, np.ndarray],
    att_state: dict[str, np.ndarray],
    av_actions: np.ndarray,
    att_actions: np.ndarray,
    meta: dict,
) -> None:
    arrays = {f"av_{k}": v for k, v in av_state.items()}
    arrays.update({f"att_{k}": v for k, v in att_state.items()})
    arrays["av_actions"] = np.asarray(av_actions)
    arrays["att_actions"] = np.asarray(att_actions)
    meta = dict(meta)
    meta["checkpoint_version"] = CHECKPOINT_VERSION
    arrays["meta_json"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8
    )
    np.savez(path, **arrays)


def load_checkpoint(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if "meta_json" not in arrays:
        raise CheckpointError(f"checkpoint {path} is missing its metadata record")
    meta = json.loads(bytes(arrays.pop("meta_json")).decode())
    if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {meta.get('checkpoint_version')!r} unsupported"
        )
    out = {
        "meta": meta,
        "av_actions": arrays.pop("av_actions"),
        "att_actions": arrays.pop("att_actions"),
        "av_state": {},
        "att_state": {},
    }
    for k, v in arrays.items():
        if k.startswith("av_"):
            out["av_state"][k[3:]] = v
        elif k.startswith("att_"):
            out["att_state"][k[4:]] = v
    return out
