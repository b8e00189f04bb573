import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from lculab.constraints import DEFAULT_RULES, allowed_modes
from lculab.nn import ModelConfig, init_weights
from lculab.partition import CuRect, PartitionTree, SplitMode, child_rects

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def legal_trees(draw, lcu_size=64, rules=DEFAULT_RULES, split_bias=0.6):
    """Trees built by drawing a legal mode at every CU."""
    rules = rules.with_lcu(lcu_size)

    def grow(cu: CuRect) -> PartitionTree:
        modes = [m for m in allowed_modes(cu, rules).modes() if m != SplitMode.NS]
        if not modes or not draw(st.booleans() if cu.depth < 2 else st.sampled_from([False, False, True])):
            return PartitionTree.leaf(cu)
        mode = draw(st.sampled_from(modes))
        return PartitionTree(cu, mode, tuple(grow(k) for k in child_rects(cu, mode)))

    return grow(CuRect.root(lcu_size))


@pytest.fixture(scope="session")
def reduced_weights():
    return init_weights(ModelConfig.reduced(), seed=3)


@pytest.fixture(scope="session")
def full_weights():
    return init_weights(ModelConfig(), seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_yuv(tmp_path):
    """Two 128x64 mosaic frames (4 LCUs) written as I420."""
    from lculab.pipeline.toy import mosaic_frame
    from lculab.pipeline.yuv import write_yuv420

    path = tmp_path / "toy.yuv"
    write_yuv420(path, [mosaic_frame(128, 64, seed=s) for s in (1, 2)])
    return path


# -- acceptance report ---------------------------------------------------------

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """``record(tag, title, ok, detail)`` prints one PASS/FAIL line and asserts ``ok``; ``ok=None`` skips."""

    def record(tag, title, ok, detail=""):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"{status} [{tag}] {title}" + (f": {detail}" if detail else "")
        print(line)
        _CRITERIA.append(line)
        if ok is None:
            pytest.skip(detail)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
