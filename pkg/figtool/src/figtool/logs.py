"""Readers for the trihop experiment file formats.

These parse the documented external interfaces (episode-log CSV schema v1,
metrics JSON, training-curve CSV) without importing the simulator package.
"""

from __future__ import annotations

import glob
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SUPPORTED_SCHEMA = 1


class LogFormatError(ValueError):
    pass


class MissingColumnError(KeyError):
    def __init__(self, column, path):
        super().__init__(f"column {column!r} missing from {path}")
        self.column = column


@dataclass
class EpisodeTable:
    path: Path
    meta: dict
    header: list
    data: np.ndarray

    def col(self, name: str) -> np.ndarray:
        if name not in self.header:
            raise MissingColumnError(name, self.path)
        return self.data[:, self.header.index(name)]

    def cols(self, names) -> np.ndarray:
        return np.stack([self.col(n) for n in names], axis=1)


def read_episode_csv(path: str | Path) -> EpisodeTable:
    path = Path(path)
    meta, header, rows = {}, None, []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("trihop-episode-log"):
                    version = int(body.split("schema=")[1])
                    if version != SUPPORTED_SCHEMA:
                        raise LogFormatError(
                            f"{path}: unsupported schema {version}")
                    meta["schema"] = version
                elif "=" in body:
                    key, _, val = body.partition("=")
                    meta[key] = val
                continue
            if header is None:
                header = line.split(",")
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                break  # truncated tail
            rows.append([float(p) for p in parts])
    if "schema" not in meta or header is None:
        raise LogFormatError(f"{path} is not a trihop episode log")
    return EpisodeTable(path=path, meta=meta, header=header,
                        data=np.array(rows).reshape(-1, len(header)))


def load_episodes(pattern: str) -> list[EpisodeTable]:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise LogFormatError(f"no episode logs match {pattern!r}")
    tables = [read_episode_csv(p) for p in paths]
    schemas = {t.meta["schema"] for t in tables}
    if len(schemas) > 1:
        raise LogFormatError(f"mixed log schema versions: {schemas}")
    return tables


def read_metrics_json(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema") != SUPPORTED_SCHEMA:
        raise LogFormatError(f"{path}: unsupported metrics schema")
    return payload


def read_training_curve(path: str | Path):
    """Training curve CSV -> dict of column arrays."""
    with open(path) as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    data = np.array([[float(v) if v not in ("", "nan") else np.nan for v in r] for r in rows])
    return {name: data[:, i] for i, name in enumerate(header)}


def quat_to_euler_xyz(q: np.ndarray) -> np.ndarray:
    """Extrinsic x-y-z Euler angles from (w, x, y, z) quaternion rows."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    roll = np.arctan2(2 * (y * z + w * x), 1 - 2 * (x * x + y * y))
    pitch = np.arcsin(np.clip(2 * (w * y - x * z), -1.0, 1.0))
    yaw = np.arctan2(2 * (x * y + w * z), 1 - 2 * (y * y + z * z))
    return np.stack([roll, pitch, yaw], axis=1)


def smallest_angle_deg(q: np.ndarray) -> np.ndarray:
    w = np.abs(np.clip(q[:, 0], -1.0, 1.0))
    return np.degrees(2.0 * np.arccos(w))
