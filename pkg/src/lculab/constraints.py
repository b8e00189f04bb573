"""Block-partitioning legality rules and constraint-masked mode selection."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceeded, IllegalGeometry, MalformedTree
from .partition import NUM_MODES, CuRect, PartitionTree, SplitMode, check_structure, child_rects

# 4 and 8 are only for exhaustive test enumeration
SUPPORTED_LCU_SIZES = (4, 8, 16, 32, 64)


@dataclass(frozen=True)
class ConstraintRules:
    max_aspect_ratio: int = 8
    max_depth: int = 6
    min_cu_side: int = 4
    lcu_size: int = 64

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.max_aspect_ratio & (self.max_aspect_ratio - 1):
            raise ValueError("max_aspect_ratio must be a power of two")
        if self.lcu_size not in SUPPORTED_LCU_SIZES:
            raise ValueError(f"lcu_size must be one of {SUPPORTED_LCU_SIZES}")

    def with_lcu(self, lcu_size: int) -> "ConstraintRules":
        return ConstraintRules(self.max_aspect_ratio, self.max_depth, self.min_cu_side, lcu_size)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_RULES = ConstraintRules()


@dataclass(frozen=True)
class ModeMask:
    allowed: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.allowed) != NUM_MODES or not self.allowed[SplitMode.NS]:
            raise ValueError("mask needs six entries with NS allowed")

    def __contains__(self, mode) -> bool:
        return self.allowed[int(mode)]

    def modes(self) -> list[SplitMode]:
        return [SplitMode(i) for i, ok in enumerate(self.allowed) if ok]

    def as_array(self) -> np.ndarray:
        return np.array(self.allowed, dtype=bool)

    @classmethod
    def of(cls, modes) -> "ModeMask":
        wanted = {int(m) for m in modes} | {0}
        return cls(tuple(i in wanted for i in range(NUM_MODES)))


ALL_MODES = ModeMask((True,) * NUM_MODES)


def _mode_ok(cu: CuRect, mode: SplitMode, rules: ConstraintRules) -> bool:
    if cu.depth >= rules.max_depth:
        return False
    if mode == SplitMode.QT and not (cu.qt_allowed and cu.w == cu.h):
        return False
    try:
        kids = child_rects(cu, mode)
    except IllegalGeometry:
        return False
    for k in kids:
        if min(k.w, k.h) < rules.min_cu_side:
            return False
        if max(k.w, k.h) > rules.max_aspect_ratio * min(k.w, k.h):
            return False
    return True


@lru_cache(maxsize=65536)
def _allowed_cached(cu: CuRect, rules: ConstraintRules) -> ModeMask:
    bits = [True] + [_mode_ok(cu, SplitMode(m), rules) for m in range(1, NUM_MODES)]
    return ModeMask(tuple(bits))


def allowed_modes(cu: CuRect, rules: ConstraintRules = DEFAULT_RULES) -> ModeMask:
    """Legal split modes for ``cu``. NS is always legal.

    A split is legal when its geometry exists, every child respects the
    minimum side and the aspect-ratio cap, the CU is above the depth cap,
    and, for QT, the CU is square with no non-QT split above it.
    """
    return _allowed_cached(cu, rules)


def masked_argmax(probs: Sequence[float], mask: ModeMask) -> SplitMode:
    """Most probable allowed mode; ties go to the smallest mode code."""
    best, best_p = SplitMode.NS, None
    for m in range(NUM_MODES):
        if not mask.allowed[m]:
            continue
        p = probs[m]
        if best_p is None or p > best_p:
            best, best_p = SplitMode(m), p
    return best


def masked_argmax_batch(probs: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Row-wise :func:`masked_argmax` over ``(B, 6)`` arrays; same tie rule."""
    scored = np.where(masks, probs, -np.inf)
    return np.argmax(scored, axis=1)  # argmax returns the first maximum


def validate_tree(tree: PartitionTree, rules: ConstraintRules = DEFAULT_RULES) -> bool:
    """True iff every node uses a mode allowed at its CU.

    Raises :class:`~lculab.errors.MalformedTree` for structural damage
    (child rects not matching the split geometry).
    """
    if tree.rect != CuRect.root(rules.lcu_size):
        check_structure(tree)
        return False
    legal = True
    stack = [tree]
    while stack:
        node = stack.pop()
        legal = legal and allowed_modes(node.rect, rules).allowed[node.mode]
        if node.mode == SplitMode.NS:
            continue
        try:
            rects = child_rects(node.rect, node.mode)
        except IllegalGeometry as exc:
            raise MalformedTree(str(exc)) from exc
        if [c.rect for c in node.children] != rects:
            raise MalformedTree(f"children of {node.rect} do not match {node.mode.name} geometry")
        stack.extend(node.children)
    return legal


# -- enumeration oracles ---------------------------------------------------


def iter_legal_trees(cu: CuRect, rules: ConstraintRules) -> Iterator[PartitionTree]:
    """Every legal subtree rooted at ``cu``, NS first then by mode code."""
    yield PartitionTree.leaf(cu)
    for mode in allowed_modes(cu, rules).modes():
        if mode == SplitMode.NS:
            continue
        kids = child_rects(cu, mode)
        for combo in itertools.product(*[list(iter_legal_trees(k, rules)) for k in kids]):
            yield PartitionTree(cu, mode, tuple(combo))


def count_legal_trees(cu: CuRect, rules: ConstraintRules) -> int:
    """Tree count by recursive product over children (no materialization)."""
    memo: dict = {}

    def rec(c: CuRect) -> int:
        if c in memo:
            return memo[c]
        total = 1
        for mode in allowed_modes(c, rules).modes():
            if mode == SplitMode.NS:
                continue
            prod = 1
            for k in child_rects(c, mode):
                prod *= rec(k)
            total += prod
        memo[c] = total
        return total

    return rec(cu)


def enumerate_legal_trees(
    lcu_size: int, rules: ConstraintRules = DEFAULT_RULES, cap: int = 1_000_000, materialize: bool = False
):
    """Count (and optionally list) all legal trees on an ``lcu_size`` square.

    The count is obtained by explicit enumeration, independent of
    :func:`count_legal_trees`. Raises :class:`CapExceeded` past ``cap``.
    """
    rules = rules.with_lcu(lcu_size)
    trees = [] if materialize else None
    n = 0
    for t in iter_legal_trees(CuRect.root(lcu_size), rules):
        n += 1
        if n > cap:
            raise CapExceeded(f"more than {cap} legal trees at lcu {lcu_size}")
        if trees is not None:
            trees.append(t)
    return (n, trees) if materialize else n
