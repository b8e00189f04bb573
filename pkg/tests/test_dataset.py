import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lculab.codec import modes_to_tree, tree_to_edges, tree_to_modes
from lculab.constraints import validate_tree
from lculab.errors import BadDimensions, BadMagic, EmptyDataset, NoDeepSamples, ShapeMismatch, TruncatedFile
from lculab.oracle import random_legal_tree
from lculab.pipeline.dataset import (
    LabelConfig,
    balance_dataset,
    build_dataset,
    deep_fraction,
    encode_record,
    extract_samples,
    read_dataset,
    write_dataset,
)
from lculab.pipeline.toy import mosaic_frame, toy_samples
from lculab.pipeline.yuv import write_yuv420
from lculab.samples import LcuSample


@st.composite
def records(draw):
    t = random_legal_tree(seed=draw(st.integers(0, 2**31)))
    px = np.frombuffer(draw(st.binary(min_size=66 * 66, max_size=66 * 66)), np.uint8).reshape(66, 66)
    return LcuSample(px.copy(), draw(st.integers(0, 63)), tree_to_edges(t), tree_to_modes(t),
                     draw(st.integers(0, 2**32 - 1)), draw(st.integers(0, 4096)), draw(st.integers(0, 4096)))


@given(st.lists(records(), max_size=4))
def test_round_trip(tmp_path_factory, recs):
    p = tmp_path_factory.mktemp("ds") / "d.lcud"
    write_dataset(p, recs)
    assert read_dataset(p) == recs


def test_header_layout(tmp_path):
    s = LcuSample(np.zeros((66, 66), np.uint8), 22, np.ones(480, np.uint8), [1, 0, 0, 0, 0], 3, 64, 0)
    p = tmp_path / "d.lcud"
    write_dataset(p, [s])
    raw = p.read_bytes()
    assert raw[:4] == b"LCUD"
    assert struct.unpack_from("<IQI", raw, 4) == (1, 1, len(encode_record(s)))
    rec = raw[20:]
    assert len(rec) == 4356 + 1 + 60 + 2 + 5 + 12
    assert rec[4356] == 22 and rec[4357:4417] == b"\xff" * 60
    assert struct.unpack_from("<H", rec, 4417) == (5,)
    assert struct.unpack_from("<III", rec, len(rec) - 12) == (3, 64, 0)


def test_read_errors(tmp_path):
    p = tmp_path / "d.lcud"
    write_dataset(p, [LcuSample(np.zeros((66, 66), np.uint8), 30)])
    raw = p.read_bytes()
    for name, data, err in [
        ("magic", b"LCUX" + raw[4:], BadMagic),
        ("version", raw[:4] + struct.pack("<I", 9) + raw[8:], BadMagic),
        ("short", raw[:-1], TruncatedFile),
        ("long", raw + b"\0", TruncatedFile),
        ("header", raw[:10], TruncatedFile),
    ]:
        (tmp_path / name).write_bytes(data)
        with pytest.raises(err):
            read_dataset(tmp_path / name)
    with pytest.raises(ShapeMismatch):
        encode_record(LcuSample(np.zeros((34, 34), np.uint8), 30))


def test_extract_counts_and_order(tmp_path):
    p = tmp_path / "v.yuv"
    write_yuv420(p, [mosaic_frame(128, 128, seed=i) for i in range(2)])
    s = extract_samples([p], 128, 128, [22, 37])
    assert len(s) == 16
    assert [(r.frame_index, r.qp, r.lcu_x, r.lcu_y) for r in s[:5]] == [
        (0, 22, 0, 0), (0, 22, 64, 0), (0, 22, 0, 64), (0, 22, 64, 64), (0, 37, 0, 0)
    ]
    assert not any(r.labelled for r in s)


def test_build_is_deterministic(tmp_path):
    p = tmp_path / "v.yuv"
    write_yuv420(p, [mosaic_frame(128, 64, seed=4)])
    a = build_dataset([p], 128, 64, [32], tmp_path / "a.lcud")
    build_dataset([p], 128, 64, [32], tmp_path / "b.lcud")
    assert (tmp_path / "a.lcud").read_bytes() == (tmp_path / "b.lcud").read_bytes()
    for r in a:
        tree = modes_to_tree(r.mode_labels)
        assert validate_tree(tree) and np.array_equal(tree_to_edges(tree), r.edge_labels)


def test_truncated_yuv(tmp_path):
    p = tmp_path / "v.yuv"
    write_yuv420(p, [mosaic_frame(64, 64)])
    p.write_bytes(p.read_bytes()[:-100])
    with pytest.raises(BadDimensions):
        build_dataset([p], 64, 64, [32], tmp_path / "x.lcud")


def test_label_config_scaling():
    cfg = LabelConfig(lam=10.0)
    assert cfg.proxy(32).lam == 10.0
    assert cfg.proxy(35).lam == pytest.approx(20.0)
    assert LabelConfig(lam=10.0, qp_scaled=False).proxy(50).lam == 10.0


def _fake(deep: bool, i: int) -> LcuSample:
    edges = np.zeros(480, np.uint8)
    edges[: 300 if deep else 50] = 1
    return LcuSample(np.full((66, 66), i % 256, np.uint8), 30, edges, [0], frame_index=i)


def test_balance_reaches_target():
    ds = [_fake(i < 15, i) for i in range(100)]
    out = balance_dataset(ds, 0.5, seed=1)
    assert deep_fraction(ds) == pytest.approx(0.15)
    assert deep_fraction(out) >= 0.5
    assert out[:100] == ds
    assert all(r.is_deep() for r in out[100:])
    assert out == balance_dataset(ds, 0.5, seed=1)


@given(st.integers(1, 30), st.integers(0, 30), st.floats(0.01, 0.99))
def test_balance_minimal(deep, shallow, target):
    ds = [_fake(True, i) for i in range(deep)] + [_fake(False, i) for i in range(shallow)]
    out = balance_dataset(ds, target)
    assert deep_fraction(out) >= target
    k = len(out) - len(ds)
    if k:
        assert (deep + k - 1) / (len(ds) + k - 1) < target


def test_balance_edge_cases():
    ds = [_fake(i < 5, i) for i in range(10)]
    assert balance_dataset(ds, 0.5) == ds
    with pytest.raises(NoDeepSamples):
        balance_dataset([_fake(False, i) for i in range(5)], 0.5)
    with pytest.raises(EmptyDataset):
        balance_dataset([], 0.5)
    with pytest.raises(ValueError):
        balance_dataset(ds, 1.0)


def test_deep_threshold_is_half():
    edges = np.zeros(480, np.uint8)
    edges[:240] = 1
    assert LcuSample(np.zeros((66, 66), np.uint8), 1, edges).is_deep()
    edges[0] = 0
    assert not LcuSample(np.zeros((66, 66), np.uint8), 1, edges).is_deep()


def test_toy_samples_are_labelled():
    s = toy_samples(3, seed=2)
    assert all(r.labelled and validate_tree(modes_to_tree(r.mode_labels)) for r in s)
    assert toy_samples(3, seed=2) == s
