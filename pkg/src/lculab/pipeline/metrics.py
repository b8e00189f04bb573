"""Encoder time saving and Bjontegaard delta rate."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DivisionByZero, InsufficientOverlap, IoError


@dataclass(frozen=True)
class TimingRecord:
    t_hpm: float  # full baseline encode
    t_hpm_prime: float  # baseline with partition decisions removed
    t_nn: float  # predictor inference

    def __post_init__(self) -> None:
        if min(self.t_hpm, self.t_hpm_prime, self.t_nn) < 0:
            raise ValueError("times must be non-negative")
        if self.t_hpm_prime > self.t_hpm:
            raise ValueError("t_hpm_prime cannot exceed t_hpm")


def time_saving(t: TimingRecord | None = None, *, t_hpm=None, t_hpm_prime=None, t_nn=None) -> float:
    """``(t_hpm - min(t_nn, t_hpm_prime)) / t_hpm``.

    >>> time_saving(TimingRecord(100, 3, 5))
    0.97
    """
    if t is None:
        t = TimingRecord(t_hpm, t_hpm_prime, t_nn)
    if t.t_hpm == 0:
        raise DivisionByZero("t_hpm is zero")
    return (t.t_hpm - min(t.t_nn, t.t_hpm_prime)) / t.t_hpm


Curve = Sequence[tuple[float, float]]  # (bitrate kbps, psnr dB)


def _fit(curve: Curve):
    pts = np.asarray(curve, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ValueError("a curve needs at least 4 (bitrate, psnr) points")
    if (pts[:, 0] <= 0).any():
        raise ValueError("bitrates must be positive")
    order = np.argsort(pts[:, 1])
    psnr, rate = pts[order, 1], np.log10(pts[order, 0])
    if np.any(np.diff(psnr) <= 0) or np.any(np.diff(rate) <= 0):
        raise ValueError("curves must be strictly increasing in both rate and PSNR")
    return psnr, np.polyfit(psnr, rate, 3)


def bd_rate(curve_a: Curve, curve_b: Curve) -> float:
    """Average bitrate change of ``b`` relative to ``a`` at equal PSNR, percent.

    Cubic fit of log10(rate) against PSNR per curve, each integrated over
    the shared PSNR interval.
    """
    pa, fa = _fit(curve_a)
    pb, fb = _fit(curve_b)
    lo, hi = max(pa[0], pb[0]), min(pa[-1], pb[-1])
    if hi <= lo:
        raise InsufficientOverlap(f"PSNR ranges do not overlap ({lo:.3f} >= {hi:.3f})")
    ia, ib = np.polyint(fa), np.polyint(fb)
    avg = ((np.polyval(ib, hi) - np.polyval(ib, lo)) - (np.polyval(ia, hi) - np.polyval(ia, lo))) / (hi - lo)
    return float((10.0 ** avg - 1.0) * 100.0)


def read_curve(path) -> list[tuple[float, float]]:
    """CSV with header ``bitrate_kbps,psnr_db``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        return [(float(r["bitrate_kbps"]), float(r["psnr_db"])) for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: expected columns bitrate_kbps,psnr_db") from exc


def write_curve(path, curve: Curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bitrate_kbps", "psnr_db"])
        w.writerows(curve)
