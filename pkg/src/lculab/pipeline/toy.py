"""Synthetic luma content for tests and desk-scale experiments."""
from __future__ import annotations

import numpy as np

from ..constraints import DEFAULT_RULES, ConstraintRules
from ..oracle import random_legal_tree
from ..samples import LcuSample
from .dataset import LabelConfig, label_sample
from .yuv import FrameBuffer, extract_lcus


def mosaic_frame(width: int, height: int, seed: int = 0, lcu_size: int = 64, noise: float = 2.0) -> np.ndarray:
    """Each LCU is painted from a random legal tree: flat leaves plus noise."""
    rng = np.random.default_rng(seed)
    rows, cols = -(-height // lcu_size), -(-width // lcu_size)
    frame = np.empty((rows * lcu_size, cols * lcu_size))
    for y0 in range(0, rows * lcu_size, lcu_size):
        for x0 in range(0, cols * lcu_size, lcu_size):
            tree = random_legal_tree(lcu_size, seed=int(rng.integers(2**31)), split_prob=0.7, decay=0.7)
            for leaf in tree.leaves():
                r = leaf.rect
                frame[y0 + r.y:y0 + r.y + r.h, x0 + r.x:x0 + r.x + r.w] = rng.uniform(20, 235)
    frame = frame[:height, :width] + rng.normal(0, noise, (height, width))
    return np.clip(np.rint(frame), 0, 255).astype(np.uint8)


def toy_samples(
    n: int,
    seed: int = 0,
    qp: int = 32,
    rules: ConstraintRules = DEFAULT_RULES,
    cfg: LabelConfig = LabelConfig(),
) -> list[LcuSample]:
    """``n`` oracle-labelled blocks, each the top-left LCU of its own mosaic."""
    out = []
    for i in range(n):
        frame = FrameBuffer.from_array(mosaic_frame(rules.lcu_size, rules.lcu_size, seed * 100_003 + i, rules.lcu_size))
        lcu = extract_lcus(frame, rules.lcu_size, qp)[0]
        out.append(label_sample(LcuSample(lcu.pixels, qp, frame_index=i), rules, cfg))
    return out
