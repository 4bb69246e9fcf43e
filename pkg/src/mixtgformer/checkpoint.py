"""MTGC checkpoint container.

Layout, all integers u32 little-endian::

    "MTGC" | version | config_len | config text (UTF-8, key = value lines)
    | tensor_count | per tensor: name_len | name | ndim | dims... | float64 LE payload
"""

import struct
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .errors import ConfigError, FormatError
from .model import init_params

MTGC_MAGIC = b"MTGC"
MTGC_VERSION = 1
_U32 = struct.Struct("<I")


def encode_checkpoint(config, params):
    parts = [MTGC_MAGIC, _U32.pack(MTGC_VERSION)]
    text = config.to_text().encode("utf-8")
    parts += [_U32.pack(len(text)), text]
    tensors = params.named_tensors()
    parts.append(_U32.pack(len(tensors)))
    for name, t in tensors:
        raw = name.encode("utf-8")
        parts += [_U32.pack(len(raw)), raw, _U32.pack(t.ndim)]
        parts += [_U32.pack(n) for n in t.shape]
        parts.append(t.data.astype("<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated checkpoint while reading {what}", self.pos)
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return _U32.unpack(self.take(4, what))[0]


def decode_checkpoint(buf):
    r = _Reader(buf)
    if r.take(4, "magic") != MTGC_MAGIC:
        raise FormatError("bad magic", 0)
    version = r.u32("version")
    if version != MTGC_VERSION:
        raise FormatError(f"unsupported MTGC version {version}", 4)
    n = r.u32("config length")
    at = r.pos
    try:
        config = ModelConfig.from_text(r.take(n, "config").decode("utf-8"))
    except (UnicodeDecodeError, ConfigError) as exc:
        raise FormatError(f"invalid config block: {exc}", at) from exc
    params = init_params(config)
    expected = dict(params.named_tensors())
    count = r.u32("tensor count")
    if count != len(expected):
        raise FormatError(f"config implies {len(expected)} tensors, file has {count}", r.pos - 4)
    for _ in range(count):
        at = r.pos
        name = r.take(r.u32("name length"), "tensor name").decode("utf-8", "replace")
        ndim = r.u32(f"rank of {name}")
        shape = tuple(r.u32(f"shape of {name}") for _ in range(ndim))
        if name not in expected:
            raise FormatError(f"unexpected tensor {name!r}", at)
        target = expected.pop(name)
        if shape != target.shape:
            raise FormatError(f"tensor {name!r} has shape {shape}, config implies {target.shape}", at)
        size = int(np.prod(shape)) * 8
        target.data = np.frombuffer(r.take(size, f"payload of {name}"), dtype="<f8") \
            .reshape(shape).astype(np.float64)
    if r.pos != len(buf):
        raise FormatError("trailing bytes after last tensor", r.pos)
    return config, params


def save_checkpoint(path, config, params):
    Path(path).write_bytes(encode_checkpoint(config, params))


def load_checkpoint(path):
    return decode_checkpoint(Path(path).read_bytes())
