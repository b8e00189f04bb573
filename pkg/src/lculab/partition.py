"""Coding-unit geometry and the partition tree of one LCU.

Child order returned by :func:`child_rects` is the traversal order used
everywhere else (mode sequences, decoding worklists, oracle search).
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Iterator

from .errors import IllegalGeometry, MalformedTree

MIN_SIDE = 4


class SplitMode(enum.IntEnum):
    NS = 0
    QT = 1
    BT_H = 2
    BT_V = 3
    EQT_H = 4
    EQT_V = 5


NUM_MODES = len(SplitMode)


@dataclass(frozen=True, order=True)
class CuRect:
    x: int
    y: int
    w: int
    h: int
    depth: int = 0
    qt_allowed: bool = True

    @classmethod
    def root(cls, lcu_size: int = 64) -> "CuRect":
        return cls(0, 0, lcu_size, lcu_size, 0, True)

    @property
    def area(self) -> int:
        return self.w * self.h

    def key(self) -> tuple[int, int, int, int, int, bool]:
        return (self.x, self.y, self.w, self.h, self.depth, self.qt_allowed)


def _child(parent: CuRect, mode: SplitMode, x: int, y: int, w: int, h: int) -> CuRect:
    if w < MIN_SIDE or h < MIN_SIDE or w % MIN_SIDE or h % MIN_SIDE:
        raise IllegalGeometry(f"{mode.name} on {parent.w}x{parent.h} gives a {w}x{h} child")
    return CuRect(x, y, w, h, parent.depth + 1, parent.qt_allowed and mode == SplitMode.QT)


def child_rects(parent: CuRect, mode: SplitMode | int) -> list[CuRect]:
    """Children of ``parent`` under ``mode`` in fixed raster order.

    EQT splits use 1:2:1 proportions: EQT_H gives a full-width top strip of
    a quarter height, two half-by-half middle blocks, and a bottom strip;
    EQT_V is its transpose.
    """
    return list(_child_rects(parent, int(mode)))


@functools.lru_cache(maxsize=1 << 16)
def _child_rects(parent: CuRect, mode: int) -> tuple[CuRect, ...]:
    mode = SplitMode(mode)
    x, y, w, h = parent.x, parent.y, parent.w, parent.h
    if mode == SplitMode.NS:
        raise IllegalGeometry("NS has no children")
    if mode == SplitMode.QT:
        hw, hh = w // 2, h // 2
        spec = [(x, y, hw, hh), (x + hw, y, hw, hh), (x, y + hh, hw, hh), (x + hw, y + hh, hw, hh)]
    elif mode == SplitMode.BT_H:
        hh = h // 2
        spec = [(x, y, w, hh), (x, y + hh, w, hh)]
    elif mode == SplitMode.BT_V:
        hw = w // 2
        spec = [(x, y, hw, h), (x + hw, y, hw, h)]
    elif mode == SplitMode.EQT_H:
        q, hw = h // 4, w // 2
        spec = [(x, y, w, q), (x, y + q, hw, 2 * q), (x + hw, y + q, hw, 2 * q), (x, y + 3 * q, w, q)]
    else:  # EQT_V
        q, hh = w // 4, h // 2
        spec = [(x, y, q, h), (x + q, y, 2 * q, hh), (x + q, y + hh, 2 * q, hh), (x + 3 * q, y, q, h)]
    return tuple(_child(parent, mode, *s) for s in spec)


@dataclass(frozen=True)
class PartitionTree:
    rect: CuRect
    mode: SplitMode = SplitMode.NS
    children: tuple["PartitionTree", ...] = field(default=())

    def __post_init__(self) -> None:
        expected = {SplitMode.NS: 0, SplitMode.BT_H: 2, SplitMode.BT_V: 2}.get(self.mode, 4)
        if len(self.children) != expected:
            raise MalformedTree(
                f"{SplitMode(self.mode).name} node needs {expected} children, got {len(self.children)}"
            )

    @classmethod
    def leaf(cls, rect: CuRect) -> "PartitionTree":
        return cls(rect, SplitMode.NS, ())

    @classmethod
    def split(cls, rect: CuRect, mode: SplitMode | int, children=None) -> "PartitionTree":
        """Split ``rect`` by ``mode``; missing children default to NS leaves."""
        mode = SplitMode(mode)
        rects = child_rects(rect, mode)
        if children is None:
            children = [cls.leaf(r) for r in rects]
        return cls(rect, mode, tuple(children))

    def nodes(self) -> Iterator["PartitionTree"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> Iterator["PartitionTree"]:
        return (n for n in self.nodes() if n.mode == SplitMode.NS)

    def depth(self) -> int:
        return max(n.rect.depth for n in self.nodes())


def node_count(tree: PartitionTree) -> int:
    return sum(1 for _ in tree.nodes())


def check_structure(tree: PartitionTree) -> None:
    """Raise :class:`MalformedTree` unless child rects match the geometry."""
    for node in tree.nodes():
        if node.mode == SplitMode.NS:
            continue
        try:
            rects = child_rects(node.rect, node.mode)
        except IllegalGeometry as exc:
            raise MalformedTree(str(exc)) from exc
        if [c.rect for c in node.children] != rects:
            raise MalformedTree(f"children of {node.rect} do not match {node.mode.name} geometry")
