"""Binary LCU dataset files, labelling and deep/shallow balancing.

Layout (little-endian)::

    b"LCUD" | version u32 | count u64 | count x (length u32 | record)
    record = pixels (66*66 u8) | qp u8 | packed edges (60 B) |
             n_tokens u16 | tokens (n u8) | frame u32 | x u32 | y u32
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..codec import EDGE_COUNT, pack_edges, unpack_edges
from ..constraints import DEFAULT_RULES, ConstraintRules
from ..errors import BadMagic, EmptyDataset, IoError, NoDeepSamples, ShapeMismatch, TruncatedFile
from ..oracle import RdProxyConfig, best_partition
from ..samples import LcuInput, LcuSample
from .parallel import parallel_map
from .yuv import extract_lcus, lcu_positions, read_yuv420

MAGIC = b"LCUD"
VERSION = 1
SIDE = 66
PIXEL_BYTES = SIDE * SIDE
EDGE_BYTES = EDGE_COUNT // 8
DEEP_THRESHOLD = EDGE_COUNT // 2
_TAIL = struct.Struct("<III")


def encode_record(s: LcuSample) -> bytes:
    px = np.asarray(s.pixels, dtype=np.uint8)
    if px.shape != (SIDE, SIDE):
        raise ShapeMismatch(f"dataset records hold 66x66 blocks, got {px.shape}")
    if not 0 <= s.qp <= 255:
        raise ValueError(f"qp {s.qp} does not fit in a byte")
    tokens = bytes(int(t) for t in s.mode_labels)
    return b"".join([
        px.tobytes(),
        struct.pack("<B", s.qp),
        pack_edges(np.asarray(s.edge_labels)),
        struct.pack("<H", len(tokens)),
        tokens,
        _TAIL.pack(s.frame_index, s.lcu_x, s.lcu_y),
    ])


def decode_record(buf: bytes) -> LcuSample:
    need = PIXEL_BYTES + 1 + EDGE_BYTES + 2
    if len(buf) < need:
        raise TruncatedFile("record shorter than its fixed header")
    px = np.frombuffer(buf, dtype=np.uint8, count=PIXEL_BYTES).reshape(SIDE, SIDE).copy()
    o = PIXEL_BYTES
    qp = buf[o]
    o += 1
    edges = unpack_edges(buf[o:o + EDGE_BYTES])
    o += EDGE_BYTES
    (n,) = struct.unpack_from("<H", buf, o)
    o += 2
    if len(buf) != o + n + _TAIL.size:
        raise TruncatedFile("record length does not match its token count")
    tokens = list(buf[o:o + n])
    frame, x, y = _TAIL.unpack_from(buf, o + n)
    return LcuSample(px, qp, edges, tokens, frame, x, y)


def write_dataset(path, samples: Iterable[LcuSample]) -> None:
    records = [encode_record(s) for s in samples]
    parts = [MAGIC, struct.pack("<IQ", VERSION, len(records))]
    for r in records:
        parts += [struct.pack("<I", len(r)), r]
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_dataset(path) -> list[LcuSample]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(data) < 16:
        raise TruncatedFile(f"{path}: missing header")
    if data[:4] != MAGIC:
        raise BadMagic(f"{path}: not an LCUD file")
    version, count = struct.unpack_from("<IQ", data, 4)
    if version != VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    out, o = [], 16
    for _ in range(count):
        if o + 4 > len(data):
            raise TruncatedFile(f"{path}: fewer records than the header claims")
        (n,) = struct.unpack_from("<I", data, o)
        o += 4
        if o + n > len(data):
            raise TruncatedFile(f"{path}: record runs past end of file")
        out.append(decode_record(data[o:o + n]))
        o += n
    if o != len(data):
        raise TruncatedFile(f"{path}: trailing bytes after last record")
    return out


# -- building ----------------------------------------------------------------


def extract_samples(yuv_paths: Sequence, width: int, height: int, qps: Sequence[int], lcu_size: int = 64) -> list[LcuSample]:
    """Unlabelled records, ordered by file, frame, QP, then raster position.

    ``frame_index`` counts frames across all files in the given order.
    """
    if lcu_size != 64:
        raise ShapeMismatch("dataset files hold 64x64 LCUs")
    out = []
    frame_index = 0
    for path in yuv_paths:
        for frame in read_yuv420(path, width, height):
            pos = list(lcu_positions(frame, lcu_size))
            for qp in qps:
                for (x, y), lcu in zip(pos, extract_lcus(frame, lcu_size, qp)):
                    out.append(LcuSample(lcu.pixels, qp, frame_index=frame_index, lcu_x=x, lcu_y=y))
            frame_index += 1
    return out


@dataclass(frozen=True)
class LabelConfig:
    """RD-proxy settings for labelling.

    With ``qp_scaled`` the multiplier grows by 2^(1/3) per QP step,
    i.e. ``lam`` is the value at ``ref_qp``.
    """

    lam: float = 10.0
    split_bits: float = 1.0
    header_bits: float = 1.0
    qp_scaled: bool = True
    ref_qp: int = 32

    def proxy(self, qp: int) -> RdProxyConfig:
        lam = self.lam * 2.0 ** ((qp - self.ref_qp) / 3.0) if self.qp_scaled else self.lam
        return RdProxyConfig(lam=lam, split_bits=self.split_bits, header_bits=self.header_bits)


def label_sample(s: LcuSample, rules: ConstraintRules = DEFAULT_RULES, cfg: LabelConfig = LabelConfig()) -> LcuSample:
    lab = best_partition(LcuInput(s.pixels, s.qp), rules, cfg.proxy(s.qp))
    return LcuSample(s.pixels, s.qp, lab.edge_labels, lab.mode_labels, s.frame_index, s.lcu_x, s.lcu_y)


def _label_job(args):
    s, rules, cfg = args
    return label_sample(s, rules, cfg)


def label_samples(samples: Sequence[LcuSample], rules=DEFAULT_RULES, cfg: LabelConfig = LabelConfig(), threads=None) -> list[LcuSample]:
    return parallel_map(_label_job, [(s, rules, cfg) for s in samples], threads)


def build_dataset(yuv_paths, width, height, qps, out_path, rules=DEFAULT_RULES, cfg: LabelConfig = LabelConfig(), threads=None):
    """Extract, label and write; returns the records written."""
    samples = label_samples(extract_samples(yuv_paths, width, height, qps), rules, cfg, threads)
    write_dataset(out_path, samples)
    return samples


# -- balancing ---------------------------------------------------------------


def deep_fraction(samples: Sequence[LcuSample]) -> float:
    if not samples:
        raise EmptyDataset("empty dataset")
    return sum(s.is_deep(DEEP_THRESHOLD) for s in samples) / len(samples)


def balance_dataset(samples: Sequence[LcuSample], target: float, seed: int = 0) -> list[LcuSample]:
    """Oversample deep records until they make up at least ``target``.

    Duplicates are appended after the originals; which deep records are
    repeated is drawn from ``seed``.
    """
    if not samples:
        raise EmptyDataset("empty dataset")
    if not 0 < target < 1:
        raise ValueError("target must lie strictly between 0 and 1")
    deep = [i for i, s in enumerate(samples) if s.is_deep(DEEP_THRESHOLD)]
    n, d = len(samples), len(deep)
    if d / n >= target:
        return list(samples)
    if not deep:
        raise NoDeepSamples("no deep records to oversample")
    k = max(0, math.ceil((target * n - d) / (1 - target)))
    while (d + k) / (n + k) < target:
        k += 1
    picks = np.random.default_rng(seed).choice(deep, size=k, replace=True)
    return list(samples) + [samples[i] for i in picks]
