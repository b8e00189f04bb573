"""YUV ingestion, dataset files, evaluation and metrics."""
from .dataset import (
    LabelConfig,
    balance_dataset,
    build_dataset,
    deep_fraction,
    extract_samples,
    label_samples,
    read_dataset,
    write_dataset,
)
from .evaluate import eval_model, infer, strip_timing
from .metrics import TimingRecord, bd_rate, read_curve, time_saving, write_curve
from .parallel import parallel_map, worker_count
from .yuv import FrameBuffer, extract_lcus, read_yuv420, write_yuv420

__all__ = [
    "FrameBuffer",
    "LabelConfig",
    "TimingRecord",
    "balance_dataset",
    "bd_rate",
    "build_dataset",
    "deep_fraction",
    "eval_model",
    "extract_lcus",
    "extract_samples",
    "infer",
    "label_samples",
    "parallel_map",
    "read_curve",
    "read_dataset",
    "read_yuv420",
    "strip_timing",
    "time_saving",
    "worker_count",
    "write_curve",
    "write_dataset",
    "write_yuv420",
]
