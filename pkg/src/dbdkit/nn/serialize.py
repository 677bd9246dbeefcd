"""Checkpoint archives: named tensors plus a shape manifest.

A checkpoint is a single .npz holding every parameter under its dotted
module path, plus a JSON manifest recording the format version, tensor
shapes/dtypes and caller-supplied metadata (architecture, config hash).
Round-trips are exact: loading restores bit-identical parameter values.
"""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = "v1"
_MANIFEST_KEY = "__manifest__"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: str | Path, state: dict[str, np.ndarray],
                    metadata: dict | None = None) -> Path:
    path = Path(path)
    manifest = {
        "version": CHECKPOINT_VERSION,
        "tensors": {k: {"shape": list(v.shape), "dtype": str(v.dtype)}
                    for k, v in sorted(state.items())},
        "metadata": metadata or {},
    }
    payload = dict(state)
    payload[_MANIFEST_KEY] = np.frombuffer(
        json.dumps(manifest, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    path.write_bytes(buf.getvalue())
    return path


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with np.load(path) as archive:
        if _MANIFEST_KEY not in archive:
            raise CheckpointError(f"{path} is not a recognized checkpoint (no manifest)")
        manifest = json.loads(bytes(archive[_MANIFEST_KEY]).decode("utf-8"))
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {manifest.get('version')!r}")
        state = {k: archive[k] for k in archive.files if k != _MANIFEST_KEY}
    for name, info in manifest["tensors"].items():
        if name not in state:
            raise CheckpointError(f"{path}: manifest lists {name} but tensor missing")
        if list(state[name].shape) != info["shape"]:
            raise CheckpointError(
                f"{path}: tensor {name} shape {list(state[name].shape)} != manifest {info['shape']}")
    return state, manifest["metadata"]
