import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import legal_trees
from lculab.codec import (
    EdgeIndex,
    edge_count,
    modes_to_tree,
    pack_edges,
    reshape_edges,
    tree_to_edges,
    tree_to_modes,
    unpack_edges,
)
from lculab.constraints import DEFAULT_RULES, allowed_modes
from lculab.errors import IllegalMode, TrailingTokens, TruncatedSequence
from lculab.oracle import edges_from_grid, leaf_id_grid, random_legal_tree
from lculab.partition import CuRect, PartitionTree, SplitMode, child_rects

S = SplitMode
ROOT = CuRect.root()


def qt_root():
    return PartitionTree.split(ROOT, S.QT)


def test_modes_examples():
    assert tree_to_modes(PartitionTree.leaf(ROOT)) == [0]
    assert tree_to_modes(qt_root()) == [1, 0, 0, 0, 0]
    top, bottom = child_rects(ROOT, S.BT_H)
    t = PartitionTree(ROOT, S.BT_H, (PartitionTree.split(top, S.BT_V), PartitionTree.leaf(bottom)))
    assert tree_to_modes(t) == [2, 3, 0, 0, 0]


def test_parse_examples():
    assert modes_to_tree([0]) == PartitionTree.leaf(ROOT)
    assert modes_to_tree([1, 0, 0, 0, 0]) == qt_root()


@pytest.mark.parametrize("tokens,err", [
    ([1, 0, 0, 0], TruncatedSequence),
    ([], TruncatedSequence),
    ([0, 0], TrailingTokens),
    ([2, 1, 0, 0, 0, 0, 0], IllegalMode),  # QT under BT_H
    ([7], IllegalMode),
    ([-1], IllegalMode),
])
def test_parse_errors(tokens, err):
    with pytest.raises(err):
        modes_to_tree(tokens)


def test_edge_examples():
    assert tree_to_edges(PartitionTree.leaf(ROOT)).sum() == 0
    e = tree_to_edges(qt_root())
    assert e.sum() == 32
    assert set(np.flatnonzero(e)) == set(range(112, 128)) | set(range(352, 368))
    full = modes_to_tree([1] + _full_qt_tail())
    assert tree_to_edges(full).sum() == 480


def _full_qt_tail():
    # pre-order tokens of the QT tree down to 4x4, without the root token
    def rec(side):
        if side == 4:
            return [0]
        out = [1]
        for _ in range(4):
            out += rec(side // 2)
        return out
    return rec(64)[1:]


def test_edge_index_layout():
    assert EdgeIndex("h", 1, 0).flat() == 0
    assert EdgeIndex("h", 15, 15).flat() == 239
    assert EdgeIndex("v", 1, 0).flat() == 240
    assert EdgeIndex("v", 15, 15).flat() == 479
    assert edge_count(64) == 480 and edge_count(16) == 24
    for i in (0, 17, 239, 240, 300, 479):
        assert EdgeIndex.from_flat(i).flat() == i


def test_reshape_examples():
    assert (reshape_edges(np.zeros(480)) == 0).all()
    v = np.zeros(480)
    v[17] = 1
    m = reshape_edges(v)
    assert m.shape == (30, 16) and m[1, 1] == 1 and m.sum() == 1
    q = reshape_edges(tree_to_edges(qt_root()))
    assert np.flatnonzero(q.sum(axis=1)).tolist() == [7, 22]
    assert (q[7] == 1).all() and (q[22] == 1).all()
    with pytest.raises(ValueError):
        reshape_edges(np.zeros(479))


@given(st.lists(st.integers(0, 1), min_size=480, max_size=480))
def test_reshape_and_pack_are_bijections(bits):
    v = np.array(bits, dtype=np.uint8)
    assert (reshape_edges(v).reshape(-1) == v).all()
    packed = pack_edges(v)
    assert len(packed) == 60
    assert (unpack_edges(packed) == v).all()


def test_pack_bit_order_is_little_endian():
    v = np.zeros(480, dtype=np.uint8)
    v[0] = 1
    v[9] = 1
    assert pack_edges(v)[:2] == bytes([0b1, 0b10])


@given(legal_trees())
def test_round_trip_and_raster_oracle(tree):
    tokens = tree_to_modes(tree)
    assert modes_to_tree(tokens) == tree
    assert (tree_to_edges(tree) == edges_from_grid(leaf_id_grid(tree))).all()


@given(legal_trees(), st.data())
def test_refinement_only_adds_edges(tree, data):
    leaves = [n for n in tree.leaves() if len(allowed_modes(n.rect, DEFAULT_RULES).modes()) > 1]
    if not leaves:
        return
    target = data.draw(st.sampled_from(leaves))
    mode = data.draw(st.sampled_from(allowed_modes(target.rect).modes()[1:]))

    def refine(node):
        if node is target:
            return PartitionTree.split(node.rect, mode)
        return PartitionTree(node.rect, node.mode, tuple(refine(c) for c in node.children))

    finer = refine(tree)
    before, after = tree_to_edges(tree), tree_to_edges(finer)
    assert (before <= after).all() and after.sum() > before.sum()


@given(st.integers(0, 2**32 - 1))
def test_random_trees_round_trip(seed):
    t = random_legal_tree(64, seed=seed)
    assert modes_to_tree(tree_to_modes(t)) == t
    assert len(tree_to_modes(t)) <= 512


@pytest.mark.parametrize("size", [8, 16])
def test_small_lcu_edges(size):
    rules = DEFAULT_RULES.with_lcu(size)
    t = modes_to_tree([1, 0, 0, 0, 0], rules)
    e = tree_to_edges(t)
    assert len(e) == edge_count(size)
    assert (e == edges_from_grid(leaf_id_grid(t))).all()
