"""Episode log files: one CSV per episode, schema v1.

Row 0 is the reset state (zero action/torque/reward); subsequent rows are
control-rate steps. Floats are written with shortest-round-trip repr so
replayed values are bit-identical. Header comment lines carry provenance
(schema version, task, seed, config hash).
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

_BASE_COLUMNS = (
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
    + ["est_height"]
    + ["contact_base"]
    + [f"contact_thigh_{i}" for i in range(3)]
    + [f"contact_shin_{i}" for i in range(3)]
    + [f"contact_foot_{i}" for i in range(3)]
)
_COMPONENT_COLUMNS = [
    "comp_orientation_3d", "comp_orientation_2d", "comp_action_rate", "comp_torques",
    "comp_dof_vel", "comp_dof_acc", "comp_collision", "comp_height", "comp_pos_cmd",
    "comp_dof_limits",
]
COLUMNS = _BASE_COLUMNS + _COMPONENT_COLUMNS + ["reward", "done"]


@dataclass
class EpisodeLog:
    meta: dict
    rows: np.ndarray  # (steps, len(COLUMNS))

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, COLUMNS.index(name)]

    def columns(self, names) -> np.ndarray:
        idx = [COLUMNS.index(n) for n in names]
        return self.rows[:, idx]


class EpisodeLogWriter:
    def __init__(self, path: str | Path, meta: dict):
        self.path = Path(path)
        self.meta = dict(meta)
        self._buf = io.StringIO()
        self._buf.write(f"# trihop-episode-log schema={SCHEMA_VERSION}\n")
        for key in sorted(self.meta):
            self._buf.write(f"# {key}={self.meta[key]}\n")
        self._buf.write(",".join(COLUMNS) + "\n")

    def append(self, values: dict):
        row = []
        for col in COLUMNS:
            v = values.get(col, float("nan"))
            row.append(repr(float(v)))
        self._buf.write(",".join(row) + "\n")

    def write(self) -> Path:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(self._buf.getvalue())
        return self.path


class LogSchemaError(ValueError):
    pass


def read_episode_log(path: str | Path) -> EpisodeLog:
    """Parse an episode log; truncated trailing rows are dropped with a
    warning instead of failing."""
    meta: dict = {}
    rows = []
    header = None
    with open(path) as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("trihop-episode-log"):
                    version = int(body.split("schema=")[1])
                    if version != SCHEMA_VERSION:
                        raise LogSchemaError(
                            f"unsupported log schema {version} (expected {SCHEMA_VERSION})")
                    meta["schema"] = version
                elif "=" in body:
                    key, _, val = body.partition("=")
                    meta[key] = val
                continue
            if header is None:
                header = line.split(",")
                if header != COLUMNS:
                    raise LogSchemaError(
                        f"column mismatch in {path}: {header[:3]}... vs expected schema")
                continue
            parts = line.split(",")
            if len(parts) != len(COLUMNS):
                warnings.warn(
                    f"{path}: truncated row at line {line_no}; replaying up to the "
                    "last complete row")
                break
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                warnings.warn(
                    f"{path}: unparseable row at line {line_no}; replaying up to the "
                    "last complete row")
                break
    if "schema" not in meta:
        raise LogSchemaError(f"{path} is not an episode log (missing schema header)")
    return EpisodeLog(meta=meta, rows=np.array(rows).reshape(-1, len(COLUMNS)))


def replay(path: str | Path):
    """Yield (t, row dict) for each logged step, exactly as logged."""
    log = read_episode_log(path)
    for row in log.rows:
        yield row[0], dict(zip(COLUMNS, row))
