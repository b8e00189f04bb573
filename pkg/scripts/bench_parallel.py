"""Time batch inference at several worker counts and check the metrics agree."""
import argparse
import time

from lculab.nn import ModelConfig, init_weights
from lculab.pipeline.evaluate import eval_model, strip_timing
from lculab.pipeline.toy import toy_samples


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--distinct", type=int, default=128, help="oracle-labelled LCUs to generate")
    p.add_argument("--repeat", type=int, default=8, help="copies of each LCU in the batch")
    p.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4])
    a = p.parse_args()

    samples = toy_samples(a.distinct, seed=21) * a.repeat
    w = init_weights(ModelConfig(), seed=2)
    base, t1 = None, None
    for n in a.threads:
        t0 = time.perf_counter()
        rep = eval_model(samples, w, threads=n)
        dt = time.perf_counter() - t0
        base = base or strip_timing(rep)
        t1 = t1 or dt
        print(f"threads {n}: {dt:.1f}s  speedup {t1 / dt:.2f}x  identical {strip_timing(rep) == base}")


if __name__ == "__main__":
    main()
