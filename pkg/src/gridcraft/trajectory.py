"""Trajectory record files: line-delimited step records behind a header.

Header: format name, version, config hash, frame shape, task id, seed.
Record: tick, flat action, reward, event codes, zlib+base64 frame bytes
(little-endian float32, lossless). Readers reject newer versions by name
and report the exact failing record index on corruption.
"""

import base64
import json
import zlib
from pathlib import Path

import numpy as np

from gridcraft.constants import FRAME_SHAPE

TRAJECTORY_FORMAT = "gridcraft.trajectory"
TRAJECTORY_VERSION = 1


class TrajectoryFormatError(ValueError):
    pass


def encode_frame(frame: np.ndarray) -> str:
    return base64.b64encode(
        zlib.compress(np.ascontiguousarray(frame, dtype="<f4").tobytes())).decode()


def decode_frame(blob: str) -> np.ndarray:
    raw = zlib.decompress(base64.b64decode(blob))
    return np.frombuffer(raw, dtype="<f4").reshape(FRAME_SHAPE).copy()


def write_trajectory(path, steps, config_hash: str = "", task_id: str = "",
                     seed: int = 0) -> None:
    """``steps``: iterable of (tick, flat_action, reward, events, frame)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(json.dumps({
            "format": TRAJECTORY_FORMAT, "version": TRAJECTORY_VERSION,
            "config_hash": config_hash, "frame_shape": list(FRAME_SHAPE),
            "task": task_id, "seed": seed}, sort_keys=True) + "\n")
        for tick, action, reward, events, frame in steps:
            f.write(json.dumps({
                "tick": int(tick), "action": int(action),
                "reward": float(reward), "events": list(events),
                "frame": encode_frame(frame)}, sort_keys=True) + "\n")


def read_trajectory(path):
    """Returns (header, steps). Raises on version mismatch or bad records."""
    path = Path(path)
    with open(path) as f:
        try:
            header = json.loads(f.readline())
        except json.JSONDecodeError:
            raise TrajectoryFormatError(f"{path}: unreadable header")
        if header.get("format") != TRAJECTORY_FORMAT:
            raise TrajectoryFormatError(f"{path} is not a trajectory file")
        if header.get("version", 0) > TRAJECTORY_VERSION:
            raise TrajectoryFormatError(
                f"{path}: file version {header['version']} newer than "
                f"supported {TRAJECTORY_VERSION}")
        steps = []
        for i, line in enumerate(f):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                steps.append((rec["tick"], rec["action"], rec["reward"],
                              rec["events"], decode_frame(rec["frame"])))
            except (json.JSONDecodeError, KeyError, zlib.error, ValueError) as e:
                raise TrajectoryFormatError(
                    f"{path}: bad record at index {i}: {e}") from None
    return header, steps


def frames_of(steps) -> np.ndarray:
    return np.stack([s[4] for s in steps]) if steps else \
        np.empty((0, *FRAME_SHAPE), dtype=np.float32)
