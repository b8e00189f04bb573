"""Overfit the reduced model on a handful of oracle-labelled toy LCUs.

Prints teacher-forced accuracy and exact-tree matches at each checkpoint.
"""
import argparse
import time

import numpy as np

from lculab.nn import ModelConfig, TrainConfig, init_weights, train
from lculab.nn.decoding import constrained_decode
from lculab.nn.training import Batch, token_accuracy
from lculab.pipeline.toy import toy_samples


def exact_matches(samples, w):
    hits = 0
    for s in samples:
        _, modes = constrained_decode(np.asarray(s.edge_labels, np.float32).reshape(30, 16), w)
        hits += modes == s.mode_labels
    return hits


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("-n", type=int, default=8)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--every", type=int, default=250)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()

    samples = toy_samples(a.n, seed=a.seed)
    batch = Batch.from_samples(samples)
    print("label lengths:", [len(s.mode_labels) for s in samples])
    w = init_weights(ModelConfig.reduced(), seed=a.seed)
    done, t0 = 0, time.perf_counter()
    while done < a.steps:
        k = min(a.every, a.steps - done)
        res = train(samples, w, TrainConfig(stage="decoder", steps=k, lr=a.lr, batch_size=a.n, seed=a.seed + done))
        w, done = res.weights, done + k
        acc = token_accuracy(batch, w, "decoder")
        print(f"step {done:5d}  loss {res.losses[-1]:.4f}  acc {acc:.3f}  "
              f"exact {exact_matches(samples, w)}/{a.n}  {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
