import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lculab.errors import DivisionByZero, InsufficientOverlap
from lculab.pipeline.metrics import TimingRecord, bd_rate, read_curve, time_saving, write_curve

CURVE = [(1000.0, 32.0), (1800.0, 34.6), (3200.0, 37.1), (6000.0, 39.8)]


def scaled(curve, f):
    return [(r * f, p) for r, p in curve]


def test_time_saving_examples():
    assert time_saving(TimingRecord(100, 3, 5)) == pytest.approx(0.97, abs=1e-12)
    assert time_saving(TimingRecord(100, 3, 2)) == pytest.approx(0.98, abs=1e-12)
    assert time_saving(TimingRecord(100, 100, 100)) == 0
    assert time_saving(t_hpm=50, t_hpm_prime=10, t_nn=20) == pytest.approx(0.8, abs=1e-12)


def test_time_saving_selects_smaller_term():
    # past t_hpm_prime the inference time stops mattering: the ceiling
    for t_nn in (3.0, 5.0, 50.0, 100.0):
        assert time_saving(TimingRecord(100, 3, t_nn)) == pytest.approx(0.97, abs=1e-12)


def test_time_saving_errors():
    with pytest.raises(DivisionByZero):
        time_saving(TimingRecord(0, 0, 0))
    with pytest.raises(ZeroDivisionError):
        time_saving(TimingRecord(0, 0, 1))
    with pytest.raises(ValueError):
        TimingRecord(10, 20, 1)
    with pytest.raises(ValueError):
        TimingRecord(10, 5, -1)


@given(st.floats(1e-3, 1e4), st.floats(0, 1), st.floats(0, 1))
def test_time_saving_in_unit_interval(t, a, b):
    ts = time_saving(TimingRecord(t, t * a, t * b))
    assert 0 <= ts <= 1


def test_bd_rate_calibration():
    assert bd_rate(CURVE, CURVE) == 0.0
    assert bd_rate(CURVE, scaled(CURVE, 1.10)) == pytest.approx(10.0, abs=0.01)
    assert bd_rate(CURVE, scaled(CURVE, 0.90)) == pytest.approx(-10.0, abs=0.01)


def test_bd_rate_matches_direct_integration():
    # independent route: trapezoid integration of the two fitted cubics on a fine grid
    b = [(r * (1 + 0.02 * i), p + 0.1) for i, (r, p) in enumerate(CURVE)]
    pa, pb = np.array(CURVE), np.array(b)
    fa = np.polyfit(pa[:, 1], np.log10(pa[:, 0]), 3)
    fb = np.polyfit(pb[:, 1], np.log10(pb[:, 0]), 3)
    lo, hi = max(pa[:, 1].min(), pb[:, 1].min()), min(pa[:, 1].max(), pb[:, 1].max())
    x = np.linspace(lo, hi, 20001)
    diff = np.polyval(fb, x) - np.polyval(fa, x)
    avg = float(((diff[1:] + diff[:-1]) / 2).sum() * (x[1] - x[0]) / (hi - lo))
    assert bd_rate(CURVE, b) == pytest.approx((10 ** avg - 1) * 100, abs=1e-6)


@given(st.floats(0.5, 2.0), st.floats(-0.3, 0.3))
def test_bd_rate_antisymmetric(f, shift):
    b = [(r * f, p + shift) for r, p in CURVE]
    fwd, back = bd_rate(CURVE, b), bd_rate(b, CURVE)
    # in log space the two are exact negatives; in percent they are reciprocals
    assert (1 + fwd / 100) * (1 + back / 100) == pytest.approx(1.0, abs=1e-9)
    if abs(fwd) < 5:
        assert abs(fwd + back) < 0.1 * max(1, abs(fwd))


def test_bd_rate_errors():
    far = [(r, p + 20) for r, p in CURVE]
    with pytest.raises(InsufficientOverlap):
        bd_rate(CURVE, far)
    with pytest.raises(ValueError):
        bd_rate(CURVE[:3], CURVE[:3])
    with pytest.raises(ValueError):
        bd_rate(CURVE, [(1000, 30), (900, 31), (1100, 32), (1200, 33)])


def test_curve_csv(tmp_path):
    p = tmp_path / "a.csv"
    write_curve(p, CURVE)
    assert p.read_text().splitlines()[0] == "bitrate_kbps,psnr_db"
    assert read_curve(p) == CURVE
    (tmp_path / "bad.csv").write_text("rate,q\n1,2\n")
    with pytest.raises(ValueError):
        read_curve(tmp_path / "bad.csv")
