"""Per-episode evaluation metrics and their summary statistics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .episode_log import EpisodeLog

METRICS_SCHEMA_VERSION = 1


@dataclass
class EpisodeMetrics:
    seed: int
    final_orientation_error_deg: float
    final_position_error_m: float     # NaN when the task has no command
    apex_height_m: float
    time_to_upright_s: float          # NaN if never upright
    collision_steps: int
    episode_return: float
    episode_length: int
    diverged: bool


@dataclass
class MetricsReport:
    task: str
    config_hash: str
    seeds: list
    episodes: list
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "schema": METRICS_SCHEMA_VERSION,
            "task": self.task,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "episodes": [asdict(e) for e in self.episodes],
            "summary": self.summary,
        }
        return json.dumps(payload, indent=2, allow_nan=True)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path


def episode_metrics(log: EpisodeLog, *, control_dt: float, final_window_s: float = 0.5,
                    upright_deg: float = 5.0, upright_hold_s: float = 0.2,
                    seed: int = 0, diverged: bool = False) -> EpisodeMetrics:
    rows = log.rows
    steps = rows.shape[0]
    window = max(1, int(round(final_window_s / control_dt)))
    ori = log.column("comp_orientation_3d")
    final_ori = float(np.degrees(np.mean(ori[-window:])))

    cmd = log.columns(["cmd_x", "cmd_y", "cmd_z"])
    if np.all(np.isnan(cmd)):
        final_pos = float("nan")
    else:
        pos = log.columns(["r_b_x", "r_b_y", "r_b_z"])
        err = np.linalg.norm(pos - cmd, axis=1)
        final_pos = float(np.mean(err[-window:]))

    apex = float(np.max(log.column("r_b_z")))

    hold = max(1, int(round(upright_hold_s / control_dt)))
    upright = np.degrees(ori) < upright_deg
    t_upright = float("nan")
    run = 0
    for i, ok in enumerate(upright):
        run = run + 1 if ok else 0
        if run >= hold:
            t_upright = float(log.column("t")[i - hold + 1])
            break

    groups = log.columns(
        ["contact_base"] + [f"contact_thigh_{i}" for i in range(3)]
        + [f"contact_shin_{i}" for i in range(3)])
    collisions = int(np.sum(np.any(groups > 0.2, axis=1)))

    return EpisodeMetrics(
        seed=seed,
        final_orientation_error_deg=final_ori,
        final_position_error_m=final_pos,
        apex_height_m=apex,
        time_to_upright_s=t_upright,
        collision_steps=collisions,
        episode_return=float(np.sum(log.column("reward"))),
        episode_length=steps - 1,  # row 0 is the reset state
        diverged=diverged,
    )


def summarize(episodes: list[EpisodeMetrics]) -> dict:
    out = {"episode_count": len(episodes),
           "diverged_count": int(sum(e.diverged for e in episodes))}
    valid = [e for e in episodes if not e.diverged]
    out["valid_count"] = len(valid)
    if not valid:
        return out
    fields = [
        "final_orientation_error_deg", "final_position_error_m", "apex_height_m",
        "time_to_upright_s", "collision_steps", "episode_return", "episode_length",
    ]
    for name in fields:
        vals = np.array([getattr(e, name) for e in valid], dtype=float)
        finite = vals[np.isfinite(vals)]
        if len(finite) == 0:
            continue
        out[name] = {
            "mean": float(np.mean(finite)),
            "median": float(np.median(finite)),
            "q1": float(np.percentile(finite, 25)),
            "q3": float(np.percentile(finite, 75)),
            "worst": float(np.max(finite)),
            "best": float(np.min(finite)),
            "count": int(len(finite)),
        }
    out["zero_collision_fraction"] = float(
        np.mean([e.collision_steps == 0 for e in valid]))
    return out
