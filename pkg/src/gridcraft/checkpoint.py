"""Checkpoint directories: a JSON manifest plus one packed tensor blob.

The manifest records name, shape, dtype, offset, and byte length for every
tensor (sorted by name); the blob holds raw little-endian bytes in that
order. Save -> load -> save is byte-identical. Readers reject manifests
written by a newer format version.
"""

import json
import os
from pathlib import Path

import numpy as np
import torch

FORMAT_VERSION = 1

_DTYPES = {
    torch.float32: "<f4", torch.float64: "<f8",
    torch.int64: "<i8", torch.int32: "<i4",
}
_NP_DTYPES = {v: np.dtype(v) for v in _DTYPES.values()}


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, kind: str, config: dict, state_dict: dict,
                    extra: dict | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    offset = 0
    for name in sorted(state_dict):
        t = state_dict[name].detach().cpu().contiguous()
        code = _DTYPES.get(t.dtype)
        if code is None:
            raise CheckpointError(f"unsupported tensor dtype {t.dtype} for {name}")
        raw = t.numpy().astype(_NP_DTYPES[code], copy=False).tobytes()
        entries.append({"name": name, "shape": list(t.shape), "dtype": code,
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    manifest = {"format_version": FORMAT_VERSION, "kind": kind,
                "config": config, "extra": extra or {}, "tensors": entries}
    _atomic_write(path / "tensors.bin", b"".join(blobs))
    _atomic_write(path / "manifest.json",
                  json.dumps(manifest, sort_keys=True, indent=1).encode() + b"\n")


def load_checkpoint(path):
    """Returns (kind, config, state_dict, extra)."""
    path = Path(path)
    mf = path / "manifest.json"
    if not mf.exists():
        raise FileNotFoundError(f"no checkpoint manifest at {mf}")
    manifest = json.loads(mf.read_text())
    version = manifest.get("format_version")
    if version is None or version > FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format {version} is newer than supported {FORMAT_VERSION}")
    raw = (path / "tensors.bin").read_bytes()
    state = {}
    for e in manifest["tensors"]:
        buf = raw[e["offset"]:e["offset"] + e["nbytes"]]
        arr = np.frombuffer(buf, dtype=_NP_DTYPES[e["dtype"]]).reshape(e["shape"])
        state[e["name"]] = torch.from_numpy(arr.copy())
    return manifest["kind"], manifest["config"], state, manifest.get("extra", {})


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
