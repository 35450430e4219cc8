"""Binary policy checkpoint format.

Layout (all integers little-endian u32):

    magic "SHPK" | version | metadata_len | metadata (UTF-8 JSON)
    then per tensor: name_len | name | rank | dims... | float32 data (LE)

Metadata carries the task kind, observation/action dims, network shape, and
the config hash. Files are written atomically (temp + rename).
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import torch

MAGIC = b"SHPK"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: str | Path, policy, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(meta)
    meta.setdefault("obs_dim", policy.obs_dim)
    meta.setdefault("act_dim", policy.act_dim)
    meta.setdefault("hidden", policy.hidden)
    meta.setdefault("activation", policy.activation)
    meta.setdefault("normalize_obs", policy.normalize_obs)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    state = policy.state_dict()
    for name in sorted(state):
        tensor = state[name].detach().cpu().to(torch.float32).numpy()
        name_b = name.encode()
        blob += struct.pack("<I", len(name_b))
        blob += name_b
        blob += struct.pack("<I", tensor.ndim)
        for d in tensor.shape:
            blob += struct.pack("<I", d)
        blob += tensor.astype("<f4").tobytes()
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_checkpoint(path: str | Path):
    """Returns (tensors: dict[str, np.ndarray], meta: dict)."""
    data = Path(path).read_bytes()
    view = memoryview(data)
    off = 0

    def take(n, what):
        nonlocal off
        if off + n > len(data):
            raise CheckpointError(f"truncated checkpoint: {what} at offset {off}")
        out = view[off:off + n]
        off += n
        return out

    if bytes(take(4, "magic")) != MAGIC:
        raise CheckpointError("not a policy checkpoint (bad magic)")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<I", take(4, "metadata length"))
    try:
        meta = json.loads(bytes(take(meta_len, "metadata")).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt metadata: {exc}")
    tensors: dict[str, np.ndarray] = {}
    while off < len(data):
        (name_len,) = struct.unpack("<I", take(4, "tensor name length"))
        name = bytes(take(name_len, "tensor name")).decode()
        (rank,) = struct.unpack("<I", take(4, "tensor rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "tensor dims")) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        raw = take(4 * count, f"tensor data for {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    return tensors, meta


def build_policy(path: str | Path):
    """Reconstruct an ActorCritic from a checkpoint; validates shapes."""
    from .nets import ActorCritic

    tensors, meta = load_checkpoint(path)
    policy = ActorCritic(
        obs_dim=int(meta["obs_dim"]),
        act_dim=int(meta["act_dim"]),
        hidden=[int(h) for h in meta["hidden"]],
        activation=meta["activation"],
        normalize_obs=bool(meta.get("normalize_obs", True)),
    )
    state = policy.state_dict()
    if set(state) != set(tensors):
        missing = set(state) ^ set(tensors)
        raise CheckpointError(f"checkpoint tensors do not match the network: {sorted(missing)}")
    for name, arr in tensors.items():
        if tuple(state[name].shape) != arr.shape:
            raise CheckpointError(
                f"shape mismatch for {name}: file {arr.shape} vs network {tuple(state[name].shape)}")
        state[name] = torch.as_tensor(arr, dtype=state[name].dtype)
    policy.load_state_dict(state)
    policy.obs_norm.frozen = True
    policy.eval()
    return policy, meta
