"""ResNet-style CNN encoder: 66x66 luma block + QP -> 480 edge probabilities.

Shapes for the default config::

    (B,1,66,66) --3x3 valid--> (B,16,64,64)
      -> 4 residual stages, each stride 2: 64 -> 32 -> 16 -> 8 -> 4
      -> flatten (B, C*4*4) ++ qp/qp_max -> linear -> 480 logits -> sigmoid
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .ops import conv2d_bwd, conv2d_fwd, gelu_bwd, gelu_fwd, linear_bwd, linear_fwd, sigmoid
from .weights import ModelWeights

INPUT_SIDE = 66


def prepare_inputs(pixels, qps, w: ModelWeights):
    px = np.asarray(pixels)
    if px.ndim == 2:
        px = px[None]
    if px.shape[1:] != (INPUT_SIDE, INPUT_SIDE):
        raise ShapeMismatch(f"encoder expects 66x66 blocks, got {px.shape[1:]}")
    dtype = w.dtype
    x = (px.astype(dtype) / dtype.type(255.0))[:, None]
    q = np.asarray(qps, dtype=dtype).reshape(-1, 1) / dtype.type(w.config.qp_max)
    if q.shape[0] != x.shape[0]:
        raise ShapeMismatch("one QP per block required")
    return x, q


def encoder_forward(pixels, qps, w: ModelWeights):
    """Returns ``(logits, cache)``; logits have shape (B, 480)."""
    x, q = prepare_inputs(pixels, qps, w)
    caches = {}
    h, caches["stem"] = conv2d_fwd(x, w["enc.stem.w"], w["enc.stem.b"])
    h, caches["stem.act"] = gelu_fwd(h)
    for i in range(4):
        p = f"enc.s{i}"
        a, caches[f"{p}.conv1"] = conv2d_fwd(h, w[f"{p}.conv1.w"], w[f"{p}.conv1.b"], stride=2, pad=1)
        a, caches[f"{p}.act1"] = gelu_fwd(a)
        a, caches[f"{p}.conv2"] = conv2d_fwd(a, w[f"{p}.conv2.w"], w[f"{p}.conv2.b"], stride=1, pad=1)
        s, caches[f"{p}.proj"] = conv2d_fwd(h, w[f"{p}.proj.w"], w[f"{p}.proj.b"], stride=2)
        h, caches[f"{p}.act2"] = gelu_fwd(a + s)
    flat_shape = h.shape
    feat = np.concatenate([h.reshape(h.shape[0], -1), q], axis=1)
    logits, _ = linear_fwd(feat, w["enc.fc.w"], w["enc.fc.b"])
    caches["fc"] = (feat, flat_shape)
    return logits, caches


def encoder_backward(dlogits, caches, w: ModelWeights, grads: dict) -> None:
    """Accumulate encoder parameter gradients into ``grads``."""
    feat, flat_shape = caches["fc"]
    dfeat, grads["enc.fc.w"], grads["enc.fc.b"] = linear_bwd(dlogits, feat, w["enc.fc.w"])
    dh = dfeat[:, :-1].reshape(flat_shape)
    for i in reversed(range(4)):
        p = f"enc.s{i}"
        dsum = gelu_bwd(dh, caches[f"{p}.act2"])
        dh_proj, grads[f"{p}.proj.w"], grads[f"{p}.proj.b"] = conv2d_bwd(dsum, caches[f"{p}.proj"], w[f"{p}.proj.w"])
        da, grads[f"{p}.conv2.w"], grads[f"{p}.conv2.b"] = conv2d_bwd(dsum, caches[f"{p}.conv2"], w[f"{p}.conv2.w"])
        da = gelu_bwd(da, caches[f"{p}.act1"])
        dh_main, grads[f"{p}.conv1.w"], grads[f"{p}.conv1.b"] = conv2d_bwd(da, caches[f"{p}.conv1"], w[f"{p}.conv1.w"])
        dh = dh_main + dh_proj
    dh = gelu_bwd(dh, caches["stem.act"])
    _, grads["enc.stem.w"], grads["enc.stem.b"] = conv2d_bwd(dh, caches["stem"], w["enc.stem.w"])


def cnn_encode(pixels, qps, w: ModelWeights) -> np.ndarray:
    """Edge probabilities in (0, 1), shape (B, 480) (or (480,) for one block)."""
    single = np.asarray(pixels).ndim == 2
    logits, _ = encoder_forward(pixels, np.atleast_1d(qps), w)
    probs = sigmoid(logits)
    # keep saturated float outputs strictly inside the open interval
    lo = np.finfo(probs.dtype).tiny
    probs = np.clip(probs, lo, np.nextafter(probs.dtype.type(1), probs.dtype.type(0)))
    return probs[0] if single else probs
