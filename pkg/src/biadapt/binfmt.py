"""Named-block binary containers shared by the world ("BIAW") and checkpoint ("BIAD") files.

Layout, all integers little-endian::

    magic        4 bytes
    version      u16
    n_blocks     u32
    per block:
      name_len   u16, then name as UTF-8
      dtype      1 byte: 'd' float64, 'f' float32, 'b' int8, 'q' int64, 's' UTF-8 text
      ndim       u8, then ndim x u32 shape
      payload    row-major little-endian values (text: raw UTF-8 bytes, shape = (n_bytes,))

Blocks keep insertion order, so writing the dict returned by :func:`read_blocks`
reproduces the original file byte for byte.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import DataError

_DTYPES = {"d": "<f8", "f": "<f4", "b": "i1", "q": "<i8"}
_CODES = {("f", 8): "d", ("f", 4): "f", ("i", 1): "b", ("i", 8): "q"}


def _code(value) -> str:
    if isinstance(value, str):
        return "s"
    dt = np.asarray(value).dtype
    if (dt.kind, dt.itemsize) not in _CODES:
        raise DataError("unsupported-dtype", f"cannot store dtype {dt}")
    return _CODES[dt.kind, dt.itemsize]


def encode_blocks(magic: bytes, version: int, blocks: dict) -> bytes:
    out = [magic, struct.pack("<HI", version, len(blocks))]
    for name, value in blocks.items():
        raw = name.encode("utf-8")
        code = _code(value)
        out.append(struct.pack("<H", len(raw)) + raw + code.encode("ascii"))
        if code == "s":
            payload = value.encode("utf-8")
            shape = (len(payload),)
        else:
            arr = np.ascontiguousarray(value, dtype=_DTYPES[code])
            shape, payload = arr.shape, arr.tobytes(order="C")
        out.append(struct.pack("<B", len(shape)) + struct.pack(f"<{len(shape)}I", *shape))
        out.append(payload)
    return b"".join(out)


def decode_blocks(data: bytes, magic: bytes, max_version: int) -> tuple[int, dict]:
    if data[:4] != magic:
        raise DataError("bad-magic", f"expected {magic!r}, found {data[:4]!r}")
    try:
        version, n = struct.unpack_from("<HI", data, 4)
        if version > max_version:
            raise DataError("bad-version", f"version {version} is newer than supported {max_version}")
        off = 10
        blocks = {}
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", data, off)
            off += 2
            name = data[off:off + ln].decode("utf-8")
            off += ln
            code = chr(data[off])
            off += 1
            (ndim,) = struct.unpack_from("<B", data, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", data, off)
            off += 4 * ndim
            if code == "s":
                blocks[name] = data[off:off + shape[0]].decode("utf-8")
                off += shape[0]
                continue
            dt = np.dtype(_DTYPES[code])
            count = int(np.prod(shape)) if ndim else 1
            nbytes = count * dt.itemsize
            if off + nbytes > len(data):
                raise DataError("truncated", f"block {name!r} runs past end of file")
            blocks[name] = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(shape).copy()
            off += nbytes
    except (struct.error, KeyError, UnicodeDecodeError, IndexError) as exc:
        raise DataError("corrupt", f"unreadable container: {exc}") from exc
    if off != len(data):
        raise DataError("corrupt", f"{len(data) - off} trailing bytes")
    return version, blocks


def write_file(path, data: bytes) -> None:
    try:
        d = os.path.dirname(os.fspath(path))
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise DataError("io", f"cannot write {path}: {exc}") from exc


def read_file(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError("io", f"cannot read {path}: {exc}") from exc
