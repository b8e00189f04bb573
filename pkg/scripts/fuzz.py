"""Decode random memories under random decoders and check every tree is legal."""
import argparse
import time

import numpy as np

from lculab.constraints import DEFAULT_RULES, validate_tree
from lculab.nn import ModelConfig, init_weights
from lculab.nn.decoding import constrained_decode_batch
from lculab.nn.weights import decoder_shapes, init_tensors


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-n", type=int, default=10_000)
    p.add_argument("--chunk", type=int, default=500)
    p.add_argument("--backend", choices=["compiled", "reference"], default="compiled")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()

    cfg = ModelConfig()
    w = init_weights(cfg, seed=a.seed)
    shapes = decoder_shapes(cfg)
    rng = np.random.default_rng(a.seed)
    lengths, bad = [], 0
    t0 = time.perf_counter()
    for start in range(0, a.n, a.chunk):
        m = min(a.chunk, a.n - start)
        mem = rng.random((m, 30, 16)).astype(np.float32)
        per_seq = [init_tensors(shapes, seed=a.seed * 1_000_003 + start + i) for i in range(m)]
        for tree, modes in constrained_decode_batch(mem, w, DEFAULT_RULES, per_seq, backend=a.backend):
            bad += not validate_tree(tree)
            lengths.append(len(modes))
    dt = time.perf_counter() - t0
    print(f"{a.n - bad}/{a.n} legal, {dt:.1f}s, tokens per tree: "
          f"mean {np.mean(lengths):.1f}, min {min(lengths)}, max {max(lengths)}")


if __name__ == "__main__":
    main()
