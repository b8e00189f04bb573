"""Record types shared by the oracle, the network and the dataset tools."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch

BORDER = 2


@dataclass(frozen=True, eq=False)
class LcuInput:
    """Luma block of side ``S + 2``: two reference rows on top, two
    reference columns on the left, the ``S x S`` LCU below-right."""

    pixels: np.ndarray
    qp: int = 32

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] != px.shape[1] or px.shape[0] <= BORDER:
            raise ShapeMismatch(f"pixels must be square (S+2)x(S+2), got {px.shape}")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px, dtype=np.uint8))

    @property
    def lcu_size(self) -> int:
        return self.pixels.shape[0] - BORDER

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LcuInput)
            and self.qp == other.qp
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(eq=False)
class LcuSample:
    """One dataset record. Unlabelled records carry empty ``mode_labels``."""

    pixels: np.ndarray
    qp: int
    edge_labels: np.ndarray = field(default_factory=lambda: np.zeros(480, dtype=np.uint8))
    mode_labels: list[int] = field(default_factory=list)
    frame_index: int = 0
    lcu_x: int = 0
    lcu_y: int = 0

    @property
    def input(self) -> LcuInput:
        return LcuInput(self.pixels, self.qp)

    @property
    def labelled(self) -> bool:
        return bool(self.mode_labels)

    def is_deep(self, threshold: int = 240) -> bool:
        return int(np.count_nonzero(self.edge_labels)) >= threshold

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LcuSample)
            and np.array_equal(self.pixels, other.pixels)
            and self.qp == other.qp
            and np.array_equal(self.edge_labels, other.edge_labels)
            and list(self.mode_labels) == list(other.mode_labels)
            and (self.frame_index, self.lcu_x, self.lcu_y) == (other.frame_index, other.lcu_x, other.lcu_y)
        )
