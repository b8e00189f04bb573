"""Teacher-forced losses, plain SGD training and finite-difference checks.

Stages:
  * ``encoder``: mean BCE between encoder probabilities and edge labels.
  * ``decoder``: mean token cross-entropy with the *label* edge map as memory.
  * ``joint``:   token cross-entropy with the encoder output as memory,
    gradients flowing through the encoder.
Constraint masking is never applied here; decoding uses it, training does not.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import EmptyDataset, SequenceTooLong, ShapeMismatch
from ..samples import LcuSample
from .decoder import decoder_backward, decoder_forward, shift_right
from .encoder import encoder_backward, encoder_forward
from .ops import log_softmax, sigmoid
from .weights import BOS, MEMORY_ROWS, MEMORY_WIDTH, ModelWeights

log = logging.getLogger(__name__)

STAGES = ("encoder", "decoder", "joint")
_STAGE_ALIASES = {"encoder_only": "encoder", "decoder_only": "decoder"}


def _stage(stage: str) -> str:
    stage = _STAGE_ALIASES.get(stage, stage)
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    return stage


@dataclass
class Batch:
    pixels: np.ndarray  # (B, 66, 66) uint8
    qps: np.ndarray  # (B,)
    edges: np.ndarray  # (B, 480) labels
    tokens_in: np.ndarray  # (B, T) BOS-shifted
    targets: np.ndarray  # (B, T)
    valid: np.ndarray  # (B, T) bool

    @classmethod
    def from_samples(cls, samples: Sequence[LcuSample], max_seq: int = 512) -> "Batch":
        if not samples:
            raise EmptyDataset("empty batch")
        T = max(len(s.mode_labels) for s in samples)
        if T > max_seq:
            raise SequenceTooLong(f"label sequence of {T} tokens exceeds max_seq={max_seq}")
        B = len(samples)
        tokens_in = np.full((B, max(T, 1)), BOS, dtype=np.int64)
        targets = np.zeros((B, max(T, 1)), dtype=np.int64)
        valid = np.zeros((B, max(T, 1)), dtype=bool)
        for i, s in enumerate(samples):
            n = len(s.mode_labels)
            tokens_in[i, :n] = shift_right(s.mode_labels)
            targets[i, :n] = s.mode_labels
            valid[i, :n] = True
        return cls(
            pixels=np.stack([s.pixels for s in samples]),
            qps=np.array([s.qp for s in samples]),
            edges=np.stack([np.asarray(s.edge_labels, dtype=np.float64) for s in samples]),
            tokens_in=tokens_in,
            targets=targets,
            valid=valid,
        )


def label_memory(batch: Batch, dtype) -> np.ndarray:
    return batch.edges.astype(dtype).reshape(-1, MEMORY_ROWS, MEMORY_WIDTH)


def _token_ce(logits, batch: Batch):
    """Mean cross-entropy over valid positions and its logit gradient."""
    logp = log_softmax(logits)
    n = batch.valid.sum()
    picked = np.take_along_axis(logp, batch.targets[..., None], axis=-1)[..., 0]
    loss = -(picked * batch.valid).sum() / n
    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, batch.targets[..., None], np.take_along_axis(dlogits, batch.targets[..., None], -1) - 1, -1)
    dlogits *= (batch.valid / n)[..., None]
    return loss, dlogits.astype(logits.dtype)


def _bce(logits, labels):
    labels = labels.astype(logits.dtype)
    # softplus(z) - y*z, written to stay finite for large |z|
    loss = (np.maximum(logits, 0) - logits * labels + np.log1p(np.exp(-np.abs(logits)))).mean()
    dlogits = (sigmoid(logits) - labels) / logits.size
    return loss, dlogits


def _target(batch):
    return batch if isinstance(batch, Batch) else Batch.from_samples(batch)


def teacher_forced_loss(batch, w: ModelWeights, stage: str = "joint", with_grads: bool = True, memory=None):
    """Scalar loss and (optionally) gradients for the tensors the stage touches.

    ``memory`` overrides the decoder memory (used to reuse a cached
    encoder output when only decoder tensors change).
    """
    stage = _stage(stage)
    batch = _target(batch)
    grads: dict[str, np.ndarray] = {}
    if stage == "encoder":
        logits, cache = encoder_forward(batch.pixels, batch.qps, w)
        if logits.shape[1] != batch.edges.shape[1]:
            raise ShapeMismatch("edge label width does not match encoder output")
        loss, dlogits = _bce(logits, batch.edges)
        if with_grads:
            encoder_backward(dlogits, cache, w, grads)
        return float(loss), grads
    enc_cache = None
    if memory is None:
        if stage == "decoder":
            memory = label_memory(batch, w.dtype)
        else:
            enc_logits, enc_cache = encoder_forward(batch.pixels, batch.qps, w)
            probs = sigmoid(enc_logits)
            memory = probs.reshape(-1, MEMORY_ROWS, MEMORY_WIDTH)
    logits, cache = decoder_forward(memory, batch.tokens_in, w)
    loss, dlogits = _token_ce(logits, batch)
    if with_grads:
        dmem = decoder_backward(dlogits, cache, w, grads)
        if enc_cache is not None:
            dprobs = dmem.reshape(probs.shape)
            encoder_backward(dprobs * probs * (1 - probs), enc_cache, w, grads)
    return float(loss), grads


def token_accuracy(batch, w: ModelWeights, stage: str = "decoder") -> float:
    """Teacher-forced argmax accuracy over all label tokens."""
    batch = _target(batch)
    stage = _stage(stage)
    if stage == "joint":
        enc_logits, _ = encoder_forward(batch.pixels, batch.qps, w)
        memory = sigmoid(enc_logits).reshape(-1, MEMORY_ROWS, MEMORY_WIDTH)
    else:
        memory = label_memory(batch, w.dtype)
    logits, _ = decoder_forward(memory, batch.tokens_in, w)
    hits = (logits.argmax(-1) == batch.targets) & batch.valid
    return float(hits.sum() / batch.valid.sum())


# -- SGD ---------------------------------------------------------------------


@dataclass
class TrainConfig:
    stage: str = "decoder"
    steps: int = 2000
    lr: float = 0.05
    batch_size: int = 8
    seed: int = 0
    log_every: int = 0
    target_accuracy: float | None = None  # stop early once reached (decoder/joint)
    check_every: int = 50


@dataclass
class TrainResult:
    weights: ModelWeights
    losses: list[float] = field(default_factory=list)
    steps: int = 0


def sgd_step(w: ModelWeights, grads: dict, lr: float) -> None:
    for name, g in grads.items():
        w.tensors[name] -= (lr * g).astype(w.tensors[name].dtype)


def train(samples: Sequence[LcuSample], w: ModelWeights, cfg: TrainConfig) -> TrainResult:
    """Plain fixed-step SGD; deterministic for a given seed. Mutates a copy."""
    if not samples:
        raise EmptyDataset("no training samples")
    w = w.copy()
    rng = np.random.default_rng(cfg.seed)
    full = Batch.from_samples(samples, w.config.max_seq)
    n = len(samples)
    result = TrainResult(w)
    for step in range(1, cfg.steps + 1):
        if cfg.batch_size >= n:
            batch = full
        else:
            idx = np.sort(rng.choice(n, size=cfg.batch_size, replace=False))
            batch = Batch.from_samples([samples[i] for i in idx], w.config.max_seq)
        loss, grads = teacher_forced_loss(batch, w, cfg.stage)
        sgd_step(w, grads, cfg.lr)
        result.losses.append(loss)
        result.steps = step
        if cfg.log_every and step % cfg.log_every == 0:
            log.info("step %d loss %.5f", step, loss)
        if (
            cfg.target_accuracy is not None
            and cfg.stage != "encoder"
            and step % cfg.check_every == 0
            and token_accuracy(full, w, cfg.stage) >= cfg.target_accuracy
        ):
            break
    return result


# -- gradient verification ----------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_tensor: dict[str, float]
    coords_checked: int


def relative_error(analytic, numeric, floor: float):
    """|a - n| / max(|a|, |n|, floor) elementwise."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def gradient_check(
    w: ModelWeights,
    sample,
    epsilon: float = 1e-3,
    stage: str = "joint",
    coords: int = 200,
    seed: int = 0,
    names: Sequence[str] | None = None,
) -> GradCheckReport:
    """Analytic vs central finite-difference gradients in float64.

    Up to ``coords`` random coordinates per tensor (every coordinate of
    smaller tensors). Decoder tensors reuse the cached encoder output,
    which is exact because it does not depend on them. The relative-error
    denominator is floored at ``epsilon**2``, the order of the central
    difference truncation error, so gradients that are numerically zero
    do not dominate the maximum.
    """
    if not 1e-4 <= epsilon <= 1e-2:
        raise ValueError("epsilon must lie in [1e-4, 1e-2]")
    stage = _stage(stage)
    batch = _target(sample if isinstance(sample, (list, tuple, Batch)) else [sample])
    w64 = w.astype(np.float64)
    _, grads = teacher_forced_loss(batch, w64, stage)
    cached_memory = None
    if stage == "joint":
        enc_logits, _ = encoder_forward(batch.pixels, batch.qps, w64)
        cached_memory = sigmoid(enc_logits).reshape(-1, MEMORY_ROWS, MEMORY_WIDTH)
    rng = np.random.default_rng(seed)
    per_tensor, total = {}, 0
    for name in names or sorted(grads):
        t = w64.tensors[name]
        flat = t.reshape(-1)
        idx = np.arange(flat.size) if flat.size <= coords else rng.choice(flat.size, coords, replace=False)
        mem = cached_memory if name.startswith("dec.") else None
        numeric = np.empty(len(idx))
        for j, k in enumerate(idx):
            old = flat[k]
            flat[k] = old + epsilon
            up, _ = teacher_forced_loss(batch, w64, stage, with_grads=False, memory=mem)
            flat[k] = old - epsilon
            down, _ = teacher_forced_loss(batch, w64, stage, with_grads=False, memory=mem)
            flat[k] = old
            numeric[j] = (up - down) / (2 * epsilon)
        analytic = grads[name].reshape(-1)[idx]
        per_tensor[name] = float(relative_error(analytic, numeric, epsilon**2).max())
        total += len(idx)
    return GradCheckReport(max(per_tensor.values()), per_tensor, total)


def gradient_norm(grads: dict) -> float:
    return float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values())))
