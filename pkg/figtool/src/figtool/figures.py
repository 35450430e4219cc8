"""Figure builders: orientation panels, torque bands, jump profiles, and
training curves, rendered deterministically from experiment logs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .logs import EpisodeTable, load_episodes, quat_to_euler_xyz, read_training_curve, smallest_angle_deg

FIGURE_KINDS = ("orientation_panels", "torque_bands", "jump_profile", "training_curve")

_STYLE = {
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "trihop-figtool",  # deterministic SVG element ids
}

YAW_IDX = [0, 3, 6]
PITCH_IDX = [1, 4, 7]
KNEE_IDX = [2, 5, 8]


@dataclass
class FigureSpec:
    kind: str
    log_glob: str
    out_path: str | Path
    fmt: str = "png"                 # png | svg
    final_window_s: float = 0.5
    title: str | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; one of {FIGURE_KINDS}")
        if self.fmt not in ("png", "svg"):
            raise ValueError("format must be png or svg")


@dataclass
class FigureResult:
    path: Path
    caption: str
    stats: dict = field(default_factory=dict)


def make_figure(spec: FigureSpec) -> FigureResult:
    builder = {
        "orientation_panels": _orientation_panels,
        "torque_bands": _torque_bands,
        "jump_profile": _jump_profile,
        "training_curve": _training_curve,
    }[spec.kind]
    with plt.rc_context(_STYLE):
        fig, caption, stats = builder(spec)
        out = Path(spec.out_path).with_suffix(f".{spec.fmt}")
        out.parent.mkdir(parents=True, exist_ok=True)
        metadata = _pinned_metadata(spec, caption)
        fig.savefig(out, format=spec.fmt, metadata=metadata)
        plt.close(fig)
    return FigureResult(path=out, caption=caption, stats=stats)


def _pinned_metadata(spec: FigureSpec, caption: str) -> dict:
    # fixed strings keep byte-identical output across runs
    if spec.fmt == "png":
        return {"Software": "trihop-figtool", "Title": spec.title or spec.kind,
                "Description": caption}
    return {"Date": None, "Creator": "trihop-figtool",
            "Title": spec.title or spec.kind, "Description": caption}


def _final_errors_deg(tables: list[EpisodeTable], window_s: float) -> np.ndarray:
    errors = []
    for t in tables:
        dt = float(t.meta.get("control_dt", 0.02))
        window = max(1, int(round(window_s / dt)))
        q = t.cols(["q_b_w", "q_b_x", "q_b_y", "q_b_z"])
        errors.append(float(np.mean(smallest_angle_deg(q)[-window:])))
    return np.array(errors)


def _orientation_panels(spec: FigureSpec):
    """Attitude traces (extrinsic x-y-z Euler angles) plus a box plot of the
    final orientation errors across episodes."""
    tables = load_episodes(spec.log_glob)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.2, 2.8),
                                   gridspec_kw={"width_ratios": [2.2, 1.0]})
    for t in tables[: min(len(tables), 6)]:
        euler = np.degrees(quat_to_euler_xyz(t.cols(["q_b_w", "q_b_x", "q_b_y", "q_b_z"])))
        time = t.col("t")
        for i, (axis_name, ls) in enumerate(zip("xyz", ["-", "--", ":"])):
            ax1.plot(time, euler[:, i], ls,
                     label=axis_name if t is tables[0] else None)
    ax1.set_xlabel("time [s]")
    ax1.set_ylabel("Euler angle (extrinsic x-y-z) [deg]")
    ax1.legend(loc="upper right", title="axis")

    errors = _final_errors_deg(tables, spec.final_window_s)
    ax2.boxplot(errors, whis=1.5, widths=0.5)
    ax2.set_xticks([1])
    ax2.set_xticklabels([f"{len(errors)} episodes"])
    ax2.set_ylabel("final orientation error [deg]")
    fig.tight_layout()
    caption = (
        f"Body orientation during reorientation (left; extrinsic x-y-z Euler angles, up to 6 "
        f"episodes shown) and final orientation errors over {len(errors)} episodes "
        f"(right; box = quartiles, whiskers = 1.5 IQR)."
    )
    stats = {
        "final_error_deg_mean": float(np.mean(errors)),
        "final_error_deg_median": float(np.median(errors)),
        "final_error_deg_q1": float(np.percentile(errors, 25)),
        "final_error_deg_q3": float(np.percentile(errors, 75)),
        "episodes": len(errors),
    }
    return fig, caption, stats


def _torque_bands(spec: FigureSpec):
    """Mean +- std bands of |torque| per joint group (legs averaged)."""
    tables = load_episodes(spec.log_glob)
    length = min(t.data.shape[0] for t in tables)
    time = tables[0].col("t")[:length]
    groups = {"yaw": YAW_IDX, "pitch": PITCH_IDX, "knee": KNEE_IDX}
    fig, axes = plt.subplots(1, 3, figsize=(7.5, 2.5), sharex=True)
    stats = {"episodes": len(tables), "steps": int(length)}
    for ax, (name, idx) in zip(axes, groups.items()):
        per_ep = np.stack([
            np.abs(t.cols([f"tau_{i}" for i in idx])[:length]).mean(axis=1)
            for t in tables
        ])
        mean = per_ep.mean(axis=0)
        std = per_ep.std(axis=0)
        ax.plot(time, mean)
        ax.fill_between(time, mean - std, mean + std, alpha=0.3)
        ax.set_title(f"{name}")
        ax.set_xlabel("time [s]")
        stats[f"{name}_mean"] = mean.tolist()
        stats[f"{name}_std"] = std.tolist()
    axes[0].set_ylabel("|joint torque| [N m]")
    fig.tight_layout()
    caption = (
        f"Joint torques during {len(tables)} episodes: thick line = mean of |torque| "
        "averaged over the three legs, shaded band = one standard deviation across episodes."
    )
    return fig, caption, stats


def _jump_profile(spec: FigureSpec):
    """Body height and horizontal distance to the commanded position."""
    tables = load_episodes(spec.log_glob)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.2, 2.6))
    dists = []
    for t in tables[: min(len(tables), 8)]:
        time = t.col("t")
        ax1.plot(time, t.col("r_b_z"))
        cmd = t.cols(["cmd_x", "cmd_y"])
        pos = t.cols(["r_b_x", "r_b_y"])
        if not np.all(np.isnan(cmd)):
            d = np.linalg.norm(pos - cmd, axis=1)
            ax2.plot(time, d)
            dists.append(float(d[-1]))
    ax1.set_xlabel("time [s]")
    ax1.set_ylabel("body height [m]")
    ax2.set_xlabel("time [s]")
    ax2.set_ylabel("horizontal distance to goal [m]")
    fig.tight_layout()
    apexes = [float(np.max(t.col("r_b_z"))) for t in tables]
    caption = (f"Jump profiles for {len(tables)} episodes: body height (left) and "
               "horizontal distance to the commanded position (right).")
    stats = {"apex_mean": float(np.mean(apexes)), "apex_max": float(np.max(apexes)),
             "final_distance_mean": float(np.mean(dists)) if dists else float("nan"),
             "episodes": len(tables)}
    return fig, caption, stats


def _training_curve(spec: FigureSpec):
    curve = read_training_curve(spec.log_glob)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.2, 2.6))
    ax1.plot(curve["iteration"], curve["mean_return"])
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("mean episode return")
    ax2.plot(curve["iteration"], curve["policy_loss"], label="policy")
    ax2.plot(curve["iteration"], curve["value_loss"], label="value")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("loss")
    ax2.set_yscale("symlog")
    ax2.legend()
    fig.tight_layout()
    finite = curve["mean_return"][np.isfinite(curve["mean_return"])]
    caption = "Training curve: mean episode return (left) and losses (right)."
    stats = {"iterations": int(curve["iteration"][-1]),
             "final_return": float(finite[-1]) if len(finite) else float("nan")}
    return fig, caption, stats
