import json
import math
from pathlib import Path

import numpy as np
import pytest

from figtool import (
    FigureSpec,
    LogFormatError,
    MissingColumnError,
    load_episodes,
    make_figure,
    read_episode_csv,
)
from figtool.logs import quat_to_euler_xyz, smallest_angle_deg

COLUMNS = (
    ["t"]
    + [f"r_b_{a}" for a in "xyz"]
    + [f"q_b_{a}" for a in "wxyz"]
    + [f"v_b_{a}" for a in "xyz"]
    + [f"w_b_{a}" for a in "xyz"]
    + [f"q_{i}" for i in range(9)]
    + [f"qd_{i}" for i in range(9)]
    + [f"action_{i}" for i in range(9)]
    + [f"tau_{i}" for i in range(9)]
    + ["theta", "phi"]
    + [f"cmd_{a}" for a in "xyz"]
    + [f"lrf_{i}" for i in range(3)]
    + ["est_height", "contact_base"]
    + [f"contact_thigh_{i}" for i in range(3)]
    + [f"contact_shin_{i}" for i in range(3)]
    + [f"contact_foot_{i}" for i in range(3)]
    + [
        "comp_orientation_3d", "comp_orientation_2d", "comp_action_rate",
        "comp_torques", "comp_dof_vel", "comp_dof_acc", "comp_collision",
        "comp_height", "comp_pos_cmd", "comp_dof_limits",
    ]
    + ["reward", "done"]
)


def write_golden_log(path: Path, seed: int, steps: int = 120, dt: float = 0.02):
    """Synthetic episode in the documented schema: a decaying reorientation
    plus oscillating torques and a parabolic hop."""
    rng = np.random.default_rng(seed)
    lines = [
        "# trihop-episode-log schema=1",
        f"# control_dt={dt}",
        "# config_hash=deadbeef",
        f"# seed={seed}",
        "# task=jump",
        ",".join(COLUMNS),
    ]
    angle0 = rng.uniform(0.5, 2.5)
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    cmd = np.array([2.0, 1.0, 0.25])
    for k in range(steps):
        t = k * dt
        angle = angle0 * math.exp(-1.5 * t) + 0.02
        q_b = [math.cos(angle / 2)] + list(math.sin(angle / 2) * axis)
        z = max(0.25, 1.2 * t - 0.6 * t * t + 0.25)
        row = {c: 0.0 for c in COLUMNS}
        row["t"] = t
        row["r_b_x"], row["r_b_y"], row["r_b_z"] = 0.3 * t, 0.15 * t, z
        row["q_b_w"], row["q_b_x"], row["q_b_y"], row["q_b_z"] = q_b
        for i in range(9):
            row[f"tau_{i}"] = (1.0 + 0.2 * rng.standard_normal()) * math.sin(
                3.0 * t + i) * (2.8 if i % 3 == 1 else 1.0)
        row["cmd_x"], row["cmd_y"], row["cmd_z"] = cmd
        row["comp_orientation_3d"] = angle
        row["reward"] = -angle
        lines.append(",".join(repr(float(row[c])) for c in COLUMNS))
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="module")
def golden_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("golden")
    for i in range(8):
        write_golden_log(d / f"episode_{i:03d}.csv", seed=100 + i)
    return d


def test_orientation_panels(golden_dir, tmp_path):
    spec = FigureSpec(kind="orientation_panels", log_glob=str(golden_dir / "episode_*.csv"),
                      out_path=tmp_path / "orient")
    result = make_figure(spec)
    assert result.path.exists() and result.path.stat().st_size > 5000
    assert "1.5 IQR" in result.caption
    assert result.stats["episodes"] == 8


def test_orientation_stats_match_independent_recompute(golden_dir, tmp_path):
    spec = FigureSpec(kind="orientation_panels", log_glob=str(golden_dir / "episode_*.csv"),
                      out_path=tmp_path / "orient")
    result = make_figure(spec)
    errors = []
    for p in sorted(golden_dir.glob("episode_*.csv")):
        tab = read_episode_csv(p)
        dt = float(tab.meta["control_dt"])
        window = max(1, round(0.5 / dt))
        q = tab.cols(["q_b_w", "q_b_x", "q_b_y", "q_b_z"])
        w = np.abs(np.clip(q[:, 0], -1, 1))
        deg = np.degrees(2 * np.arccos(w))
        errors.append(np.mean(deg[-window:]))
    errors = np.array(errors)
    assert abs(result.stats["final_error_deg_mean"] - errors.mean()) < 1e-9
    assert abs(result.stats["final_error_deg_median"] - np.median(errors)) < 1e-9
    assert abs(result.stats["final_error_deg_q1"] - np.percentile(errors, 25)) < 1e-9
    assert abs(result.stats["final_error_deg_q3"] - np.percentile(errors, 75)) < 1e-9


def test_torque_bands_match_recompute(golden_dir, tmp_path):
    spec = FigureSpec(kind="torque_bands", log_glob=str(golden_dir / "episode_*.csv"),
                      out_path=tmp_path / "torque")
    result = make_figure(spec)
    tables = [read_episode_csv(p) for p in sorted(golden_dir.glob("episode_*.csv"))]
    length = min(t.data.shape[0] for t in tables)
    for name, idx in [("yaw", [0, 3, 6]), ("pitch", [1, 4, 7]), ("knee", [2, 5, 8])]:
        per_ep = np.stack([
            np.abs(t.cols([f"tau_{i}" for i in idx])[:length]).mean(axis=1) for t in tables])
        assert np.abs(np.array(result.stats[f"{name}_mean"]) - per_ep.mean(axis=0)).max() < 1e-9
        assert np.abs(np.array(result.stats[f"{name}_std"]) - per_ep.std(axis=0)).max() < 1e-9
    assert "legs" in result.caption


def test_jump_profile(golden_dir, tmp_path):
    spec = FigureSpec(kind="jump_profile", log_glob=str(golden_dir / "episode_*.csv"),
                      out_path=tmp_path / "jump", fmt="svg")
    result = make_figure(spec)
    assert result.path.suffix == ".svg"
    assert result.stats["apex_max"] > 0.25


def test_byte_stable_regeneration(golden_dir, tmp_path):
    for fmt in ("png", "svg"):
        a = make_figure(FigureSpec(kind="orientation_panels",
                                   log_glob=str(golden_dir / "episode_*.csv"),
                                   out_path=tmp_path / f"a_{fmt}", fmt=fmt))
        b = make_figure(FigureSpec(kind="orientation_panels",
                                   log_glob=str(golden_dir / "episode_*.csv"),
                                   out_path=tmp_path / f"b_{fmt}", fmt=fmt))
        assert a.path.read_bytes() == b.path.read_bytes(), fmt


def test_empty_log_set_errors(tmp_path):
    spec = FigureSpec(kind="orientation_panels", log_glob=str(tmp_path / "none_*.csv"),
                      out_path=tmp_path / "x")
    with pytest.raises(LogFormatError, match="no episode logs"):
        make_figure(spec)
    assert not (tmp_path / "x.png").exists()


def test_missing_column_named(golden_dir, tmp_path):
    # strip a required column from a copy of a golden log
    src = (golden_dir / "episode_000.csv").read_text().splitlines()
    out = []
    for line in src:
        if line.startswith("#"):
            out.append(line)
        else:
            cells = line.split(",")
            drop = COLUMNS.index("tau_0")
            out.append(",".join(cells[:drop] + cells[drop + 1:]))
    bad = tmp_path / "episode_bad.csv"
    bad.write_text("\n".join(out) + "\n")
    with pytest.raises(MissingColumnError, match="tau_0"):
        make_figure(FigureSpec(kind="torque_bands", log_glob=str(bad),
                               out_path=tmp_path / "y"))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown figure kind"):
        FigureSpec(kind="pie", log_glob="x", out_path=tmp_path / "z")


def test_training_curve(tmp_path):
    curve = tmp_path / "training_curve.csv"
    lines = ["iteration,mean_return,mean_episode_length,policy_loss,value_loss,"
             "entropy,kl,clip_fraction,lr,wall_time_s"]
    for i in range(30):
        lines.append(f"{i+1},{-700+10*i},{250},{0.01},{100-3*i},{12},{0.01},{0.1},{0.001},{i}")
    curve.write_text("\n".join(lines) + "\n")
    result = make_figure(FigureSpec(kind="training_curve", log_glob=str(curve),
                                    out_path=tmp_path / "curve"))
    assert result.stats["iterations"] == 30
    assert result.stats["final_return"] == -700 + 10 * 29


def test_euler_convention_roundtrip():
    # pure rotations about each axis come back on the matching Euler channel
    for axis_idx in range(3):
        angle = 0.4
        axis = np.zeros(3)
        axis[axis_idx] = 1.0
        q = np.array([[np.cos(angle / 2), *np.sin(angle / 2) * axis]])
        euler = quat_to_euler_xyz(q)[0]
        assert euler[axis_idx] == pytest.approx(angle, abs=1e-12)
        assert np.abs(np.delete(euler, axis_idx)).max() < 1e-12
    assert smallest_angle_deg(np.array([[np.cos(0.2), np.sin(0.2), 0, 0]]))[0] == pytest.approx(
        np.degrees(0.4), abs=1e-9)
