"""Write a synthetic I420 clip whose LCUs are painted from random legal trees.

    python scripts/make_toy_data.py out.yuv --size 256x128 --frames 4
"""
import argparse

from lculab.pipeline.toy import mosaic_frame
from lculab.pipeline.yuv import parse_size, write_yuv420


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out")
    p.add_argument("--size", default="256x128")
    p.add_argument("--frames", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=2.0)
    a = p.parse_args()
    w, h = parse_size(a.size)
    write_yuv420(a.out, [mosaic_frame(w, h, seed=a.seed + i, noise=a.noise) for i in range(a.frames)])
    print(f"wrote {a.frames} frames of {w}x{h} to {a.out}")


if __name__ == "__main__":
    main()
