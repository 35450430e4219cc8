"""Configuration loading, overrides, and provenance hashing.

The config is a plain nested dict loaded from YAML. `load_config` merges an
optional user file and dotted-path overrides onto the packaged defaults.
`config_hash` produces the provenance digest embedded in logs and
checkpoints.
"""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml


class ConfigError(ValueError):
    """Raised for malformed config files or override paths."""


def default_config() -> dict:
    text = resources.files("trihop").joinpath("default_config.yaml").read_text()
    return yaml.safe_load(text)


def _deep_merge(base: dict, extra: Mapping) -> dict:
    for key, value in extra.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


def _parse_scalar(text: str) -> Any:
    return yaml.safe_load(text)


def apply_override(cfg: dict, dotted: str) -> None:
    """Apply one 'a.b.c=value' override in place."""
    if "=" not in dotted:
        raise ConfigError(f"override {dotted!r} is not of the form key.path=value")
    path, _, raw = dotted.partition("=")
    keys = path.strip().split(".")
    node = cfg
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"unknown config path {path!r}")
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(f"unknown config path {path!r}")
    node[keys[-1]] = _parse_scalar(raw)


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> dict:
    cfg = default_config()
    if path is not None:
        try:
            user = yaml.safe_load(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"could not parse {path}: {exc}")
        if user is not None:
            if not isinstance(user, dict):
                raise ConfigError(f"{path} must contain a mapping at top level")
            _deep_merge(cfg, user)
    for item in overrides:
        apply_override(cfg, item)
    return cfg


def config_hash(cfg: Mapping) -> str:
    """Stable digest of a resolved config (sorted-key JSON, sha256)."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def dump_config(cfg: Mapping, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(dict(cfg), sort_keys=False))
