"""Config file loading, canonical hashing, and run manifests."""

import hashlib
import json
import os
import time
from dataclasses import fields
from pathlib import Path

from gridcraft import __version__
from gridcraft.ppo import PPOConfig
from gridcraft.reward_model import RewardModelConfig
from gridcraft.reward_train import RewardTrainConfig
from gridcraft.world import ConfigError, WorldConfig


def load_json(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} does not exist")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON ({e})")


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _check_keys(data: dict, cls, where: str) -> None:
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def world_config_from_dict(data: dict, seed_override=None) -> WorldConfig:
    _check_keys(data, WorldConfig, "world config")
    data = dict(data)
    if "spawn_table" in data:
        data["spawn_table"] = tuple((k, int(c)) for k, c in data["spawn_table"])
    if seed_override is not None:
        data["seed"] = seed_override
    if "seed" not in data:
        raise ConfigError("world config: missing seed")
    cfg = WorldConfig(**data)
    cfg.validate()
    return cfg


def world_config_to_dict(cfg: WorldConfig) -> dict:
    return {"seed": cfg.seed, "size": cfg.size, "terrain_mix": cfg.terrain_mix,
            "weather": cfg.weather, "daylight": cfg.daylight,
            "spawn_table": [list(x) for x in cfg.spawn_table]}


def ppo_config_from_dict(data: dict) -> PPOConfig:
    _check_keys(data, PPOConfig, "training config")
    return PPOConfig(**data)


def reward_train_config_from_dict(data: dict) -> RewardTrainConfig:
    _check_keys(data, RewardTrainConfig, "reward training config")
    return RewardTrainConfig(**data)


def reward_model_config_from_dict(data: dict, vocab_size: int) -> RewardModelConfig:
    _check_keys(data, RewardModelConfig, "reward model config")
    data = dict(data)
    data.setdefault("vocab_size", vocab_size)
    return RewardModelConfig(**data)


class RunManifest:
    """Written atomically at run start and again at completion."""

    def __init__(self, out_dir, command: str, seed: int, cfg_hash: str):
        self.path = Path(out_dir) / "run_manifest.json"
        self.data = {
            "command": command,
            "code_version": __version__,
            "seed": seed,
            "config_hash": cfg_hash,
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "finished_at": None,
            "artifacts": [],
            "status": "running",
        }
        self.write()

    def add_artifact(self, path) -> None:
        self.data["artifacts"].append(str(path))

    def finish(self, status: str = "ok") -> None:
        self.data["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.data["status"] = status
        self.write()

    def write(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.data, sort_keys=True, indent=1) + "\n")
        os.replace(tmp, self.path)


def dump_json(path, obj) -> None:
    """Canonical JSON artifact: sorted keys, trailing newline, atomic."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")
    os.replace(tmp, path)
