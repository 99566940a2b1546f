"""Versioned binary weight files.

Layout (all integers little-endian)::

    b"LGNNWGT\\0"            8-byte magic
    u32 version
    u32 n_bytes, JSON         spec descriptor + blob index (names, shapes)
    per blob: f64[...]        little-endian parameter data
              u32 crc32       checksum of the blob bytes
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .models import ModelSpec, SeqModel, model_from_parts

MAGIC = b"LGNNWGT\0"
VERSION = 1


class WeightFileError(ValueError):
    pass


def _blobs(model: SeqModel):
    for k in sorted(model.params):
        yield "param:" + k, model.params[k]
    for k in sorted(model.buffers):
        yield "buffer:" + k, model.buffers[k]


def dumps(model: SeqModel, meta: dict | None = None) -> bytes:
    items = list(_blobs(model))
    header = {
        "spec": model.spec.to_dict(),
        "blobs": [[name, list(arr.shape)] for name, arr in items],
        "meta": meta or {},
    }
    hb = json.dumps(header, sort_keys=True).encode()
    out = [MAGIC, struct.pack("<II", VERSION, len(hb)), hb]
    for _, arr in items:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        out.append(data)
        out.append(struct.pack("<I", zlib.crc32(data) & 0xFFFFFFFF))
    return b"".join(out)


def loads(raw: bytes) -> tuple[SeqModel, dict]:
    if raw[:8] != MAGIC:
        raise WeightFileError("not a weight file (bad magic)")
    version, hlen = struct.unpack_from("<II", raw, 8)
    if version != VERSION:
        raise WeightFileError(f"unsupported weight file version {version}")
    off = 16
    header = json.loads(raw[off:off + hlen])
    off += hlen
    params, buffers = {}, {}
    for name, shape in header["blobs"]:
        n = int(np.prod(shape)) if shape else 1
        data = raw[off:off + 8 * n]
        if len(data) != 8 * n:
            raise WeightFileError(f"truncated blob {name}")
        off += 8 * n
        (crc,) = struct.unpack_from("<I", raw, off)
        off += 4
        if zlib.crc32(data) & 0xFFFFFFFF != crc:
            raise WeightFileError(f"checksum mismatch in blob {name}")
        arr = np.frombuffer(data, dtype="<f8").astype(float).reshape(shape)
        kind, key = name.split(":", 1)
        (params if kind == "param" else buffers)[key] = arr
    spec = ModelSpec.from_dict(header["spec"])
    return model_from_parts(spec, params, buffers), header.get("meta", {})


def save_model(model: SeqModel, path, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps(model, meta))


def load_model(path) -> SeqModel:
    return loads(Path(path).read_bytes())[0]
