"""Weights files.

After the shared container header, the payload holds every entry of the
module's ``state_dict`` (parameters, then buffers, in registration order) as
little-endian float32. The header lists names and shapes in that order.
"""
from __future__ import annotations

import hashlib
import json
from typing import Optional

import numpy as np
import torch

from ..dataset import ScalingBounds
from ..fileformat import FileFormatError, IntegrityError, read_container, verify_checksum, write_container
from .networks import Critic, CriticConfig, Generator, GeneratorConfig

__all__ = ["ConfigMismatchError", "SavedModel", "save_params", "load_params", "load_into", "bounds_fingerprint"]

MAGIC = b"PDABGAN1"
VERSION = 1


class ConfigMismatchError(FileFormatError):
    pass


def bounds_fingerprint(bounds: Optional[ScalingBounds]) -> Optional[str]:
    if bounds is None:
        return None
    text = json.dumps(bounds.to_json(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


class SavedModel:
    """A loaded generator or critic with its scaling bounds and metadata."""

    def __init__(self, module, bounds, provenance):
        self.module = module
        self.bounds = bounds
        self.provenance = provenance

    @property
    def config(self):
        return self.module.config


def _kind(module) -> str:
    if isinstance(module, Generator):
        return "generator"
    if isinstance(module, Critic):
        return "critic"
    raise TypeError(f"cannot save {type(module).__name__}")


def save_params(
    module,
    path,
    bounds: Optional[ScalingBounds] = None,
    provenance: Optional[dict] = None,
) -> None:
    state = module.state_dict()
    tensors, blobs = [], []
    for name, t in state.items():
        arr = t.detach().cpu().numpy()
        tensors.append({"name": name, "shape": list(arr.shape)})
        blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    header = {
        "version": VERSION,
        "kind": _kind(module),
        "config": module.config.to_dict(),
        "bounds": None if bounds is None else bounds.to_json(),
        "bounds_fingerprint": bounds_fingerprint(bounds),
        "provenance": provenance or {},
        "tensors": tensors,
    }
    write_container(path, MAGIC, header, blobs)


def _read(path):
    header, payload = read_container(path, MAGIC, VERSION)
    try:
        tensors = header["tensors"]
        expected = sum(int(np.prod(t["shape"], dtype=np.int64)) for t in tensors) * 4
        kind, config = header["kind"], header["config"]
    except (KeyError, TypeError) as exc:
        raise IntegrityError(f"{path}: incomplete header ({exc})") from None
    if len(payload) != expected:
        raise IntegrityError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    verify_checksum(path, header, payload)
    state, pos = {}, 0
    for t in tensors:
        n = int(np.prod(t["shape"], dtype=np.int64))
        arr = np.frombuffer(payload[pos:pos + 4 * n], dtype="<f4").reshape(t["shape"])
        state[t["name"]] = torch.from_numpy(arr.astype(np.float32))
        pos += 4 * n
    bounds = header.get("bounds")
    if bounds is not None:
        bounds = ScalingBounds.from_json(bounds)
        if bounds_fingerprint(bounds) != header.get("bounds_fingerprint"):
            raise IntegrityError(f"{path}: scaling bounds do not match their fingerprint")
    return kind, config, state, bounds, header.get("provenance", {})


def _build(kind: str, config: dict):
    if kind == "generator":
        return Generator(GeneratorConfig(**config))
    if kind == "critic":
        return Critic(CriticConfig(**config))
    raise FileFormatError(f"unknown module kind {kind!r}")


def _assign(module, state: dict, path):
    own = module.state_dict()
    if list(own) != list(state):
        raise ConfigMismatchError(f"{path}: tensor names do not match the target module")
    for name, t in state.items():
        if tuple(own[name].shape) != tuple(t.shape):
            raise ConfigMismatchError(
                f"{path}: {name} has shape {tuple(t.shape)}, module expects {tuple(own[name].shape)}"
            )
        own[name].copy_(t.to(own[name].dtype))


def load_params(path) -> SavedModel:
    kind, config, state, bounds, prov = _read(path)
    try:
        module = _build(kind, config)
    except (TypeError, ValueError) as exc:
        raise IntegrityError(f"{path}: invalid stored config ({exc})") from None
    with torch.no_grad():
        _assign(module, state, path)
    module.eval()
    return SavedModel(module, bounds, prov)


def load_into(module, path) -> SavedModel:
    """Load weights into an existing module, checking kind and config."""
    kind, config, state, bounds, prov = _read(path)
    if kind != _kind(module):
        raise ConfigMismatchError(f"{path}: stores a {kind}, target is a {_kind(module)}")
    if json.loads(json.dumps(module.config.to_dict())) != config:
        raise ConfigMismatchError(f"{path}: stored config {config} differs from {module.config.to_dict()}")
    with torch.no_grad():
        _assign(module, state, path)
    return SavedModel(module, bounds, prov)
