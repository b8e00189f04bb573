"""Conversions between partition trees, mode sequences and basic-edge maps.

Edge layout for an LCU of side ``S`` with ``n = S // 4`` cells per side:
horizontal grid lines first (line 1..n-1, top to bottom, cells left to
right), then vertical lines (line 1..n-1, left to right, cells top to
bottom). For ``S = 64`` this is 240 + 240 = 480 entries, and each row of
the ``(30, 16)`` reshape is one full grid line.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .constraints import DEFAULT_RULES, ConstraintRules, allowed_modes
from .errors import IllegalMode, TrailingTokens, TruncatedSequence
from .partition import CuRect, PartitionTree, SplitMode, child_rects

EDGE_COUNT = 480
MEMORY_SHAPE = (30, 16)
MAX_SEQ = 512


@dataclass(frozen=True)
class EdgeIndex:
    orientation: str  # "h" or "v"
    line: int  # 1 .. n-1
    cell: int  # 0 .. n-1

    def flat(self, cells: int = 16) -> int:
        base = 0 if self.orientation == "h" else (cells - 1) * cells
        return base + (self.line - 1) * cells + self.cell

    @classmethod
    def from_flat(cls, index: int, cells: int = 16) -> "EdgeIndex":
        half = (cells - 1) * cells
        orient = "h" if index < half else "v"
        line, cell = divmod(index % half, cells)
        return cls(orient, line + 1, cell)


def edge_count(lcu_size: int = 64) -> int:
    n = lcu_size // 4
    return 2 * (n - 1) * n


def tree_to_modes(tree: PartitionTree) -> list[int]:
    return [int(node.mode) for node in tree.nodes()]


_MODES = tuple(SplitMode)


def modes_to_tree(tokens: Iterable[int], rules: ConstraintRules = DEFAULT_RULES) -> PartitionTree:
    """Parse a pre-order mode sequence, checking legality at every CU."""
    tokens = [int(t) for t in tokens]
    pos = 0

    def parse(rect: CuRect) -> PartitionTree:
        nonlocal pos
        if pos >= len(tokens):
            raise TruncatedSequence(f"sequence ended at token {pos} with pending CU {rect}")
        tok = tokens[pos]
        if not 0 <= tok < 6 or tok not in allowed_modes(rect, rules):
            raise IllegalMode(f"token {tok} at position {pos} is not allowed for {rect}")
        pos += 1
        mode = _MODES[tok]
        if mode == SplitMode.NS:
            return PartitionTree.leaf(rect)
        return PartitionTree(rect, mode, tuple(parse(c) for c in child_rects(rect, mode)))

    tree = parse(CuRect.root(rules.lcu_size))
    if pos != len(tokens):
        raise TrailingTokens(f"{len(tokens) - pos} tokens left after complete tree")
    return tree


def tree_to_edges(tree: PartitionTree, lcu_size: int | None = None) -> np.ndarray:
    """Binary basic-edge map: 1 where an internal edge lies on a CU border."""
    size = lcu_size or tree.rect.w
    n = size // 4
    horiz = np.zeros((n - 1, n), dtype=np.uint8)  # [line-1, cell]
    vert = np.zeros((n - 1, n), dtype=np.uint8)
    for leaf in tree.leaves():
        r = leaf.rect
        cx0, cy0, cx1, cy1 = r.x // 4, r.y // 4, (r.x + r.w) // 4, (r.y + r.h) // 4
        for line in (cy0, cy1):
            if 0 < line < n:
                horiz[line - 1, cx0:cx1] = 1
        for line in (cx0, cx1):
            if 0 < line < n:
                vert[line - 1, cy0:cy1] = 1
    return np.concatenate([horiz.ravel(), vert.ravel()])


def reshape_edges(v: Sequence[float]) -> np.ndarray:
    arr = np.asarray(v)
    if arr.shape[-1] != EDGE_COUNT:
        raise ValueError(f"expected {EDGE_COUNT} edges, got {arr.shape[-1]}")
    return arr.reshape(arr.shape[:-1] + MEMORY_SHAPE)


def pack_edges(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_edges(data: bytes, count: int = EDGE_COUNT) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")[:count]
