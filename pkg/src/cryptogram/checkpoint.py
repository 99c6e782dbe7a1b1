"""Versioned checkpoint container.

A checkpoint is a plain zip archive, readable without this package:

    meta.json                   format version, model config, head kind,
                                step counter, training config, tensor manifest
    model/<name>.npy            one array per weight tensor (state_dict keys)
    opt/<index>/<name>.npy      optimizer slot arrays (exp_avg, exp_avg_sq, step)

Arrays are standard .npy files whose headers record shape, dtype, and byte
order (we always write little-endian '<'). meta.json lists every tensor with
its shape and dtype so readers can verify the manifest before loading.
No pickled objects anywhere.
"""

from __future__ import annotations

import io
import json
import zipfile
from typing import Optional

import numpy as np
import torch

FORMAT_VERSION = 1


def _to_npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    if arr.dtype.byteorder == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))
    np.save(buf, arr, allow_pickle=False)
    return buf.getvalue()


def _from_npy_bytes(data: bytes) -> np.ndarray:
    return np.load(io.BytesIO(data), allow_pickle=False)


def save_checkpoint(path, model, optimizer=None, step: int = 0,
                    train_config: Optional[dict] = None,
                    extra: Optional[dict] = None) -> None:
    """Write model (and optionally optimizer) state to ``path``."""
    from .model.heads import BijectiveHead, LinearHead  # avoid import cycle

    head_kind = "unknown"
    if hasattr(model, "head"):
        if isinstance(model.head, BijectiveHead):
            head_kind = "bijective"
        elif isinstance(model.head, LinearHead):
            head_kind = "standard"

    manifest = {}
    meta = {
        "format_version": FORMAT_VERSION,
        "byte_order": "little-endian",
        "step": int(step),
        "head": head_kind,
        "model_config": model.cfg.to_dict() if hasattr(model, "cfg") else None,
        "train_config": train_config,
        "extra": extra or {},
        # orientation note for the bijective score matrix dumps
        "matrix_orientation": "row=ciphertext letter, column=plaintext letter",
    }

    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, tensor in model.state_dict().items():
            arr = tensor.detach().cpu().numpy()
            manifest[f"model/{name}"] = {"shape": list(arr.shape),
                                         "dtype": str(arr.dtype)}
            zf.writestr(f"model/{name}.npy", _to_npy_bytes(arr))
        if optimizer is not None:
            osd = optimizer.state_dict()
            meta["optimizer"] = {"param_groups": osd["param_groups"],
                                 "state_keys": {}}
            for idx, slots in osd["state"].items():
                names = []
                for key, value in slots.items():
                    arr = (value.detach().cpu().numpy()
                           if torch.is_tensor(value) else np.asarray(value))
                    entry = f"opt/{idx}/{key}"
                    manifest[entry] = {"shape": list(arr.shape),
                                       "dtype": str(arr.dtype)}
                    zf.writestr(entry + ".npy", _to_npy_bytes(arr))
                    names.append(key)
                meta["optimizer"]["state_keys"][str(idx)] = names
        meta["tensors"] = manifest
        zf.writestr("meta.json", json.dumps(meta, indent=1))


def read_meta(path) -> dict:
    with zipfile.ZipFile(path) as zf:
        return json.loads(zf.read("meta.json"))


def load_checkpoint(path, model, optimizer=None) -> dict:
    """Restore state into an already-constructed model (and optimizer).

    Returns the checkpoint metadata; raises on format or shape mismatch.
    """
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"checkpoint format {meta.get('format_version')} unsupported")
        state = {}
        for name in model.state_dict():
            arr = _from_npy_bytes(zf.read(f"model/{name}.npy"))
            state[name] = torch.from_numpy(arr.copy())
        model.load_state_dict(state)
        if optimizer is not None:
            if "optimizer" not in meta:
                raise ValueError("checkpoint holds no optimizer state")
            osd = {"param_groups": meta["optimizer"]["param_groups"], "state": {}}
            for idx, keys in meta["optimizer"]["state_keys"].items():
                slots = {}
                for key in keys:
                    arr = _from_npy_bytes(zf.read(f"opt/{idx}/{key}.npy"))
                    slots[key] = torch.from_numpy(arr.copy())
                osd["state"][int(idx)] = slots
            optimizer.load_state_dict(osd)
    return meta


def load_model(path):
    """Build a fresh model from checkpoint metadata and load its weights.

    Returns (model, meta). The head kind and model config come from meta.json.
    """
    from .model.backbone import ModelConfig
    from .model.heads import build_model

    meta = read_meta(path)
    if meta.get("model_config") is None:
        raise ValueError("checkpoint lacks a model config")
    cfg = ModelConfig.from_dict(meta["model_config"])
    model = build_model(cfg, head=meta.get("head", "standard"))
    load_checkpoint(path, model)
    model.eval()
    return model, meta
