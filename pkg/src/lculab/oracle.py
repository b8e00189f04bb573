"""Brute-force ground truth: RD-proxy partition search and random legal trees.

The cost model is a stand-in for a reference encoder's RDO: a leaf costs
the smallest SSE among four simple intra predictors plus ``lam *
header_bits``; every split node adds ``lam * split_bits``. Neighbour
samples are original pixels, not reconstructions.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .codec import tree_to_edges, tree_to_modes
from .constraints import DEFAULT_RULES, ConstraintRules, allowed_modes, iter_legal_trees
from .errors import CapExceeded
from .partition import CuRect, PartitionTree, SplitMode, child_rects
from .samples import BORDER, LcuInput

PREDICTORS = ("dc", "horizontal", "vertical", "planar")


@dataclass(frozen=True)
class RdProxyConfig:
    lam: float = 10.0
    split_bits: float = 1.0
    header_bits: float = 1.0
    predictors: tuple[str, ...] = PREDICTORS

    def __post_init__(self) -> None:
        if self.lam < 0 or self.split_bits < 0 or self.header_bits < 0:
            raise ValueError("lam, split_bits and header_bits must be >= 0")
        unknown = set(self.predictors) - set(PREDICTORS)
        if unknown or not self.predictors:
            raise ValueError(f"unknown predictors {sorted(unknown)}")


@dataclass(eq=False)
class LabeledLcu:
    input: LcuInput
    best_tree: PartitionTree
    mode_labels: list[int]
    edge_labels: np.ndarray
    cost: float


def predict(block: np.ndarray, rect: CuRect, predictor: str) -> np.ndarray:
    """Intra prediction of ``rect`` from the row above and column left of it."""
    x0, y0 = rect.x + BORDER, rect.y + BORDER
    top = block[y0 - 1, x0:x0 + rect.w].astype(np.float64)
    left = block[y0:y0 + rect.h, x0 - 1].astype(np.float64)
    if predictor == "dc":
        return np.full((rect.h, rect.w), (top.sum() + left.sum()) / (rect.w + rect.h))
    if predictor == "horizontal":
        return np.repeat(left[:, None], rect.w, axis=1)
    if predictor == "vertical":
        return np.repeat(top[None, :], rect.h, axis=0)
    if predictor == "planar":
        i = np.arange(rect.h)[:, None]
        j = np.arange(rect.w)[None, :]
        horiz = ((rect.w - 1 - j) * left[:, None] + (j + 1) * top[-1]) / rect.w
        vert = ((rect.h - 1 - i) * top[None, :] + (i + 1) * left[-1]) / rect.h
        return (horiz + vert) / 2
    raise ValueError(predictor)


def leaf_cost(pixels: LcuInput, rect: CuRect, cfg: RdProxyConfig) -> float:
    block = pixels.pixels
    orig = block[rect.y + BORDER:rect.y + BORDER + rect.h, rect.x + BORDER:rect.x + BORDER + rect.w]
    orig = orig.astype(np.float64)
    sse = min(float(((orig - predict(block, rect, p)) ** 2).sum()) for p in cfg.predictors)
    return sse + cfg.lam * cfg.header_bits


def _split_cost(cfg: RdProxyConfig, child_costs) -> float:
    # shared by every search so that float sums associate identically
    total = cfg.lam * cfg.split_bits
    for c in child_costs:
        total += c
    return total


class _LeafCosts:
    def __init__(self, pixels: LcuInput, cfg: RdProxyConfig):
        self.pixels, self.cfg = pixels, cfg
        self.cache: dict[tuple[int, int, int, int], float] = {}

    def __call__(self, rect: CuRect) -> float:
        k = (rect.x, rect.y, rect.w, rect.h)
        if k not in self.cache:
            self.cache[k] = leaf_cost(self.pixels, rect, self.cfg)
        return self.cache[k]


def _label(pixels: LcuInput, tree: PartitionTree, cost: float) -> LabeledLcu:
    return LabeledLcu(pixels, tree, tree_to_modes(tree), tree_to_edges(tree), cost)


def best_partition(
    pixels: LcuInput,
    rules: ConstraintRules = DEFAULT_RULES,
    cfg: RdProxyConfig = RdProxyConfig(),
    memoize: bool = True,
    cap: int | None = None,
) -> LabeledLcu:
    """Exact minimum-cost legal tree by recursive search.

    Memoized on the CU (position, size, depth, QT flag). Ties prefer NS,
    then the smallest mode code. With ``memoize=False`` the recursion
    is plain exhaustive and ``cap`` bounds the number of visited CUs.
    """
    rules = rules.with_lcu(pixels.lcu_size)
    costs = _LeafCosts(pixels, cfg)
    memo: dict[CuRect, tuple[float, PartitionTree]] = {}
    visits = 0

    def solve(cu: CuRect) -> tuple[float, PartitionTree]:
        nonlocal visits
        if memoize and cu in memo:
            return memo[cu]
        visits += 1
        if cap is not None and visits > cap:
            raise CapExceeded(f"visited more than {cap} CUs")
        best_cost, best_tree = costs(cu), PartitionTree.leaf(cu)
        for mode in allowed_modes(cu, rules).modes():
            if mode == SplitMode.NS:
                continue
            subs = [solve(k) for k in child_rects(cu, mode)]
            c = _split_cost(cfg, (s[0] for s in subs))
            if c < best_cost:
                best_cost, best_tree = c, PartitionTree(cu, mode, tuple(s[1] for s in subs))
        if memoize:
            memo[cu] = (best_cost, best_tree)
        return best_cost, best_tree

    cost, tree = solve(CuRect.root(rules.lcu_size))
    return _label(pixels, tree, cost)


def tree_cost(tree: PartitionTree, leaf: Callable[[CuRect], float], cfg: RdProxyConfig) -> float:
    if tree.mode == SplitMode.NS:
        return leaf(tree.rect)
    return _split_cost(cfg, (tree_cost(c, leaf, cfg) for c in tree.children))


def exhaustive_partition(
    pixels: LcuInput,
    rules: ConstraintRules = DEFAULT_RULES,
    cfg: RdProxyConfig = RdProxyConfig(),
    trees: list[PartitionTree] | None = None,
    cap: int = 200_000,
) -> LabeledLcu:
    """Cost every legal tree and keep the cheapest.

    Ties are resolved by the lexicographically smallest pre-order mode
    sequence, which coincides with the NS-first, smallest-code rule of
    :func:`best_partition`.
    """
    rules = rules.with_lcu(pixels.lcu_size)
    costs = _LeafCosts(pixels, cfg)
    if trees is None:
        trees = []
        for t in iter_legal_trees(CuRect.root(rules.lcu_size), rules):
            trees.append(t)
            if len(trees) > cap:
                raise CapExceeded(f"more than {cap} legal trees")
    best = None
    for t in trees:
        key = (tree_cost(t, costs, cfg), tree_to_modes(t))
        if best is None or key < best[0]:
            best = (key, t)
    (cost, _), tree = best
    return _label(pixels, tree, cost)


def random_legal_tree(
    lcu_size: int = 64,
    rules: ConstraintRules = DEFAULT_RULES,
    seed: int | None = None,
    split_prob: float = 0.9,
    decay: float = 0.8,
) -> PartitionTree:
    """Random legal tree; deterministic per seed.

    A CU splits with probability ``split_prob * decay**depth`` (when any
    split is legal); the split mode is uniform over the legal ones.
    """
    rules = rules.with_lcu(lcu_size)
    rng = random.Random(seed)

    def grow(cu: CuRect) -> PartitionTree:
        splits = [m for m in allowed_modes(cu, rules).modes() if m != SplitMode.NS]
        if not splits or rng.random() >= split_prob * decay ** cu.depth:
            return PartitionTree.leaf(cu)
        mode = rng.choice(splits)
        return PartitionTree(cu, mode, tuple(grow(k) for k in child_rects(cu, mode)))

    return grow(CuRect.root(lcu_size))


# -- rasterization oracle for edge maps -------------------------------------


def leaf_id_grid(tree: PartitionTree, lcu_size: int | None = None) -> np.ndarray:
    """Paint each leaf's index onto the 4x4-cell grid (-1 where uncovered)."""
    size = lcu_size or tree.rect.w
    grid = np.full((size // 4, size // 4), -1, dtype=np.int32)
    for i, leaf in enumerate(tree.leaves()):
        r = leaf.rect
        grid[r.y // 4:(r.y + r.h) // 4, r.x // 4:(r.x + r.w) // 4] = i
    return grid


def edges_from_grid(grid: np.ndarray) -> np.ndarray:
    """Edge map from a painted grid: 1 where neighbouring cells differ."""
    horiz = (grid[1:, :] != grid[:-1, :]).astype(np.uint8)  # line k between rows k-1, k
    vert = (grid[:, 1:] != grid[:, :-1]).astype(np.uint8).T
    return np.concatenate([horiz.ravel(), vert.ravel()])
