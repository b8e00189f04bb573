"""Named weight tensors, initialisation and the ``LCUW`` file format.

File layout (little-endian throughout)::

    b"LCUW" | version u32 | config block (12 x u32) | tensor count u32 |
    per tensor: name length u16, UTF-8 name, rank u8, dims u32 x rank,
                raw float32 payload
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BadMagic, ShapeMismatch, TruncatedFile
from .config import CONFIG_INTS, ModelConfig

MAGIC = b"LCUW"
VERSION = 1
MEMORY_WIDTH = 16
MEMORY_ROWS = 30
EDGES = 480
EMBED_ROWS = 7  # six modes + BOS
BOS = 6


def encoder_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c = cfg.cnn_stem_channels
    shapes["enc.stem.w"] = (c, 1, 3, 3)
    shapes["enc.stem.b"] = (c,)
    for i, co in enumerate(cfg.cnn_stage_channels):
        p = f"enc.s{i}"
        shapes[f"{p}.conv1.w"] = (co, c, 3, 3)
        shapes[f"{p}.conv1.b"] = (co,)
        shapes[f"{p}.conv2.w"] = (co, co, 3, 3)
        shapes[f"{p}.conv2.b"] = (co,)
        shapes[f"{p}.proj.w"] = (co, c, 1, 1)
        shapes[f"{p}.proj.b"] = (co,)
        c = co
    shapes["enc.fc.w"] = (c * 4 * 4 + 1, EDGES)
    shapes["enc.fc.b"] = (EDGES,)
    return shapes


def decoder_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.model_dim, cfg.ffn_dim
    shapes: dict[str, tuple[int, ...]] = {"dec.embed": (EMBED_ROWS, d)}
    for i in range(cfg.decoder_layers):
        p = f"dec.l{i}"
        for att, kv_in in (("self", d), ("cross", MEMORY_WIDTH)):
            shapes[f"{p}.{att}.q.w"] = (d, d)
            shapes[f"{p}.{att}.q.b"] = (d,)
            for proj in ("k", "v"):
                shapes[f"{p}.{att}.{proj}.w"] = (kv_in, d)
                shapes[f"{p}.{att}.{proj}.b"] = (d,)
            shapes[f"{p}.{att}.o.w"] = (d, d)
            shapes[f"{p}.{att}.o.b"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, f)
        shapes[f"{p}.ffn.b1"] = (f,)
        shapes[f"{p}.ffn.w2"] = (f, d)
        shapes[f"{p}.ffn.b2"] = (d,)
        for ln in ("ln1", "ln2", "ln3"):
            shapes[f"{p}.{ln}.g"] = (d,)
            shapes[f"{p}.{ln}.b"] = (d,)
    shapes["dec.out.w"] = (d, cfg.vocab_out)
    shapes["dec.out.b"] = (cfg.vocab_out,)
    return shapes


def expected_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    return {**encoder_shapes(cfg), **decoder_shapes(cfg)}


@dataclass
class ModelWeights:
    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        want = expected_shapes(self.config)
        have = {k: tuple(v.shape) for k, v in self.tensors.items()}
        if set(want) != set(have):
            missing, extra = sorted(set(want) - set(have)), sorted(set(have) - set(want))
            raise ShapeMismatch(f"missing {missing[:5]}, unexpected {extra[:5]}")
        bad = [k for k in want if want[k] != have[k]]
        if bad:
            raise ShapeMismatch(f"{bad[0]}: expected {want[bad[0]]}, got {have[bad[0]]}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def astype(self, dtype) -> "ModelWeights":
        return ModelWeights(self.config, {k: v.astype(dtype) for k, v in self.tensors.items()})

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def names(self, prefix: str = "") -> list[str]:
        return [k for k in self.tensors if k.startswith(prefix)]

    def equal(self, other: "ModelWeights") -> bool:
        return self.config == other.config and self.tensors.keys() == other.tensors.keys() and all(
            np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors
        )


def init_tensors(shapes: dict[str, tuple[int, ...]], seed: int = 0, dtype=np.float32) -> dict[str, np.ndarray]:
    """He-normal convolutions, scaled-normal linears, unit LayerNorm."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in shapes.items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "dec.embed":
            t = rng.normal(0.0, 1.0, shape)
        elif leaf == "g":
            t = np.ones(shape)
        elif len(shape) == 1:
            t = np.zeros(shape)
        elif len(shape) == 4:
            fan_in = shape[1] * shape[2] * shape[3]
            t = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
        else:
            t = rng.normal(0.0, np.sqrt(1.0 / shape[0]), shape)
        tensors[name] = t.astype(dtype)
    return tensors


def init_weights(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> ModelWeights:
    return ModelWeights(cfg, init_tensors(expected_shapes(cfg), seed, dtype))


def save_weights(w: ModelWeights, path) -> None:
    buf = bytearray(MAGIC)
    buf += struct.pack("<I", VERSION)
    buf += struct.pack(f"<{CONFIG_INTS}I", *w.config.as_ints())
    buf += struct.pack("<I", len(w.tensors))
    for name in sorted(w.tensors):
        t = np.ascontiguousarray(w.tensors[name], dtype="<f4")
        raw = name.encode("utf-8")
        buf += struct.pack("<H", len(raw)) + raw
        buf += struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape)
        buf += t.tobytes()
    Path(path).write_bytes(bytes(buf))


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"needed {n} bytes at offset {self.pos}, file has {len(self.data)}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_weights(path) -> ModelWeights:
    r = _Reader(Path(path).read_bytes())
    if r.data[:4] != MAGIC:
        raise BadMagic(f"{path} is not an LCUW weights file")
    r.take(4)
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise BadMagic(f"unsupported weights version {version}")
    cfg = ModelConfig.from_ints(r.unpack(f"<{CONFIG_INTS}I"))
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (n,) = r.unpack("<H")
        name = r.take(n).decode("utf-8")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        size = int(np.prod(dims, dtype=np.int64))
        tensors[name] = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(dims).astype(np.float32)
    if r.pos != len(r.data):
        raise TruncatedFile(f"{len(r.data) - r.pos} unexpected trailing bytes")
    return ModelWeights(cfg, tensors)
