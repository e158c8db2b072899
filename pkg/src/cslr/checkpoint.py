"""Checkpoint files: named parameter arrays plus an optional metadata blob.

Layout (all integers little-endian):

    magic    8 bytes  b"CSLRCKPT"
    version  u32      currently 1
    metalen  u32      length of a UTF-8 JSON metadata string (may be 0)
    metadata metalen bytes
    count    u32      number of parameter entries
    entries  repeated:
        namelen u16, name utf-8,
        ndim u8, dims u32 each,
        payload raw little-endian float64, row-major
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

MAGIC = b"CSLRCKPT"
VERSION = 1


class CheckpointError(ValueError):
    """Malformed, truncated or incompatible checkpoint file."""


def save_checkpoint(path: Union[str, Path], named_arrays: dict,
                    metadata: Optional[dict] = None) -> None:
    meta_bytes = b"" if metadata is None else json.dumps(
        metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(named_arrays)))
        for name, array in named_arrays.items():
            arr = np.ascontiguousarray(array, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())


def _read(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return buf


def load_checkpoint(path: Union[str, Path]) -> tuple[dict, Optional[dict]]:
    """Return (name -> float64 array, metadata dict or None)."""
    with open(path, "rb") as fh:
        if _read(fh, len(MAGIC), "magic") != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        version, metalen = struct.unpack("<II", _read(fh, 8, "header"))
        if version != VERSION:
            raise CheckpointError(
                f"checkpoint format version {version} unsupported (expected {VERSION})"
            )
        metadata = None
        if metalen:
            metadata = json.loads(_read(fh, metalen, "metadata").decode("utf-8"))
        (count,) = struct.unpack("<I", _read(fh, 4, "entry count"))
        arrays = {}
        for _ in range(count):
            (namelen,) = struct.unpack("<H", _read(fh, 2, "name length"))
            name = _read(fh, namelen, "name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read(fh, 1, "rank"))
            shape = struct.unpack(f"<{ndim}I", _read(fh, 4 * ndim, "shape"))
            nbytes = 8 * int(np.prod(shape, dtype=np.int64)) if ndim else 8
            payload = _read(fh, nbytes, f"payload of {name}")
            arrays[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
        return arrays, metadata


def save_module(path: Union[str, Path], module, metadata: Optional[dict] = None) -> None:
    save_checkpoint(path, {name: p.data for name, p in module.named_parameters()},
                    metadata)


def load_module(path: Union[str, Path], module) -> Optional[dict]:
    """Load arrays into an existing module; shapes must match exactly."""
    arrays, metadata = load_checkpoint(path)
    params = dict(module.named_parameters())
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise CheckpointError(
            f"parameter names disagree with checkpoint (missing {missing}, extra {extra})"
        )
    for name, param in params.items():
        if arrays[name].shape != param.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name}: checkpoint {arrays[name].shape}, "
                f"model {param.data.shape}"
            )
        param.data[...] = arrays[name]
    return metadata
