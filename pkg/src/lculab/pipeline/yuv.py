"""8-bit planar YUV 4:2:0 reading and LCU extraction."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import BadDimensions, EmptyFrame, IoError
from ..samples import BORDER, LcuInput

FILL = 128  # unavailable reference samples


@dataclass(frozen=True, eq=False)
class FrameBuffer:
    width: int
    height: int
    luma: np.ndarray  # (height, width) uint8

    def __post_init__(self) -> None:
        y = np.asarray(self.luma)
        if y.shape != (self.height, self.width):
            raise BadDimensions(f"luma plane {y.shape} does not match {self.height}x{self.width}")
        object.__setattr__(self, "luma", np.ascontiguousarray(y, dtype=np.uint8))

    @classmethod
    def from_array(cls, luma) -> "FrameBuffer":
        y = np.asarray(luma)
        if y.ndim != 2:
            raise BadDimensions("luma must be 2-D")
        return cls(y.shape[1], y.shape[0], y)


def parse_size(text: str) -> tuple[int, int]:
    """``"WxH"`` -> ``(W, H)``."""
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise BadDimensions(f"size must look like 1920x1080, got {text!r}") from None
    return w, h


def frame_bytes(width: int, height: int) -> int:
    if width <= 0 or height <= 0:
        raise EmptyFrame(f"frame {width}x{height} has no pixels")
    if width % 2 or height % 2:
        raise BadDimensions("4:2:0 frames need even width and height")
    return width * height * 3 // 2


def read_yuv420(path, width: int, height: int) -> list[FrameBuffer]:
    """All frames of an 8-bit I420 file; chroma is read and dropped."""
    size = frame_bytes(width, height)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(data) % size:
        raise BadDimensions(f"{path}: {len(data)} bytes is not a multiple of the {size}-byte frame")
    if not data:
        raise EmptyFrame(f"{path} holds no frames")
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, size)
    luma = raw[:, : width * height].reshape(-1, height, width)
    return [FrameBuffer(width, height, f) for f in luma]


def write_yuv420(path, frames, chroma: int = 128) -> None:
    """Write luma frames as I420 with flat chroma (for tests and toy data)."""
    with open(path, "wb") as fh:
        for f in frames:
            y = np.asarray(f.luma if isinstance(f, FrameBuffer) else f, dtype=np.uint8)
            h, w = y.shape
            fh.write(y.tobytes())
            fh.write(np.full(w * h // 2, chroma, dtype=np.uint8).tobytes())


def pad_frame(frame: FrameBuffer, lcu_size: int = 64) -> np.ndarray:
    """Luma padded to LCU multiples by replicating the last row/column."""
    if frame.width == 0 or frame.height == 0:
        raise EmptyFrame("frame has no pixels")
    ph = -frame.height % lcu_size
    pw = -frame.width % lcu_size
    return np.pad(frame.luma, ((0, ph), (0, pw)), mode="edge")


def lcu_positions(frame: FrameBuffer, lcu_size: int = 64) -> Iterator[tuple[int, int]]:
    """Top-left corners in raster order over the padded frame."""
    rows = -(-frame.height // lcu_size)
    cols = -(-frame.width // lcu_size)
    for r in range(rows):
        for c in range(cols):
            yield c * lcu_size, r * lcu_size


def _block(padded: np.ndarray, x: int, y: int, s: int) -> np.ndarray:
    out = np.full((s + BORDER, s + BORDER), FILL, dtype=np.uint8)
    out[BORDER:, BORDER:] = padded[y:y + s, x:x + s]
    if y >= BORDER:
        out[:BORDER, BORDER:] = padded[y - BORDER:y, x:x + s]
    if x >= BORDER:
        out[BORDER:, :BORDER] = padded[y:y + s, x - BORDER:x]
    if x >= BORDER and y >= BORDER:
        out[:BORDER, :BORDER] = padded[y - BORDER:y, x - BORDER:x]
    return out


def extract_lcus(frame: FrameBuffer, lcu_size: int = 64, qp: int = 32) -> list[LcuInput]:
    """One ``(S+2) x (S+2)`` block per LCU, raster order.

    Reference rows/columns come from neighbouring original pixels of the
    padded frame; outside the frame they are filled with 128.
    """
    padded = pad_frame(frame, lcu_size)
    return [LcuInput(_block(padded, x, y, lcu_size), qp) for x, y in lcu_positions(frame, lcu_size)]
