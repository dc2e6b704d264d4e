"""The "BIAD" checkpoint container: a JSON manifest plus named float64 parameter blocks."""

from __future__ import annotations

import json

import numpy as np

from ..binfmt import decode_blocks, encode_blocks, read_file, write_file
from ..errors import DataError

MAGIC = b"BIAD"
VERSION = 1
MANIFEST = "__manifest__"


def encode_checkpoint(manifest: dict, tensors: dict[str, np.ndarray]) -> bytes:
    if MANIFEST in tensors:
        raise DataError("reserved-name", f"{MANIFEST} is reserved")
    blocks = {MANIFEST: json.dumps(manifest, sort_keys=True, separators=(",", ":"))}
    for name, value in tensors.items():
        blocks[name] = np.asarray(value, dtype=np.float64)
    return encode_blocks(MAGIC, VERSION, blocks)


def decode_checkpoint(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    _, blocks = decode_blocks(data, MAGIC, VERSION)
    if MANIFEST not in blocks:
        raise DataError("missing-manifest", "checkpoint has no manifest block")
    try:
        manifest = json.loads(blocks.pop(MANIFEST))
    except json.JSONDecodeError as exc:
        raise DataError("corrupt", f"bad manifest: {exc}") from exc
    for name, v in blocks.items():
        if not isinstance(v, np.ndarray) or v.dtype != np.float64:
            raise DataError("corrupt", f"block {name!r} is not float64")
    return manifest, blocks


def save_checkpoint(path, manifest: dict, tensors: dict[str, np.ndarray]) -> None:
    write_file(path, encode_checkpoint(manifest, tensors))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    return decode_checkpoint(read_file(path))
