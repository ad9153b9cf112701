"""Binary checkpoints and key=value config files.

Checkpoint layout (all integers little-endian)::

    b"LFCK"  u32 version  u32 tensor_count
    per tensor: u32 name_len, name (UTF-8), u32 rank, rank x u64 dims,
                prod(dims) x f32 values
"""

import struct
from dataclasses import fields

import numpy as np

from .autograd import Tensor
from .model import ModelConfig

MAGIC = b"LFCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(params)))
        for name, t in params.items():
            data = t.data if isinstance(t, Tensor) else np.asarray(t)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
            fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def load_checkpoint(path, requires_grad=True):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    pos = 4

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(buf):
            raise CheckpointError(f"{path}: truncated")
        vals = struct.unpack_from(fmt, buf, pos)
        pos += size
        return vals

    version, count = take("<II")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    params = {}
    for _ in range(count):
        (name_len,) = take("<I")
        name = buf[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = take("<I")
        dims = take(f"<{rank}Q") if rank else ()
        size = int(np.prod(dims, dtype=np.int64)) * 4
        if pos + size > len(buf):
            raise CheckpointError(f"{path}: truncated tensor {name!r}")
        data = np.frombuffer(buf, dtype="<f4", count=size // 4, offset=pos).reshape(dims).astype(np.float32)
        pos += size
        params[name] = Tensor(data, requires_grad=requires_grad, dtype=np.float32)
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    return params


# ---------------------------------------------------------------------------
# key=value files


def parse_kv(text, source="<config>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _coerce(field_type, value, key):
    if field_type is bool:
        low = str(value).lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {value!r}")
    try:
        return field_type(value)
    except ValueError:
        raise ValueError(f"{key}: expected {field_type.__name__}, got {value!r}") from None


def config_from_kv(kv):
    known = {f.name: f.type for f in fields(ModelConfig)}
    unknown = sorted(set(kv) - set(known))
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    return ModelConfig(**{k: _coerce(known[k], v, k) for k, v in kv.items()})


def config_to_text(cfg):
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name}={str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"


def read_config(path):
    with open(path, encoding="utf-8") as fh:
        return config_from_kv(parse_kv(fh.read(), str(path)))


def write_config(path, cfg):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_to_text(cfg))
