"""Array primitives with hand-written backward passes.

Each ``*_fwd`` returns ``(out, cache)``; the matching ``*_bwd`` takes the
upstream gradient and the cache and returns the input gradient plus any
parameter gradients. Everything runs in the dtype of its inputs.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

LN_EPS = 1e-5
_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def sinusoidal(positions: int, dim: int, dtype=np.float32) -> np.ndarray:
    pos = np.arange(positions)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle)).astype(dtype)


# -- dense -------------------------------------------------------------------


def linear_fwd(x, w, b):
    return x @ w + b, x


def linear_bwd(dy, x, w):
    d_in, d_out = w.shape
    dw = x.reshape(-1, d_in).T @ dy.reshape(-1, d_out)
    db = dy.reshape(-1, d_out).sum(axis=0)
    return dy @ w.T, dw, db


def gelu(x):
    return x * (0.5 * (1.0 + erf(x * _INV_SQRT2)))


def gelu_fwd(x):
    return gelu(x), x


def gelu_bwd(dy, x):
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return dy * (cdf + x * pdf)


def layernorm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd, g)


def layernorm_bwd(dy, cache):
    xhat, rstd, g = cache
    d = xhat.shape[-1]
    dxhat = dy * g
    dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                 - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    dg = (dy * xhat).reshape(-1, d).sum(axis=0)
    db = dy.reshape(-1, d).sum(axis=0)
    return dx, dg, db


def softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def sigmoid(z):
    # split by sign so neither branch overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# -- attention ---------------------------------------------------------------


def split_heads(x, heads):
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def mha_fwd(xq, xkv, p, prefix, heads, causal):
    """Multi-head attention. ``p`` maps ``{prefix}.{q,k,v,o}.{w,b}`` to arrays."""
    q, _ = linear_fwd(xq, p[f"{prefix}.q.w"], p[f"{prefix}.q.b"])
    k, _ = linear_fwd(xkv, p[f"{prefix}.k.w"], p[f"{prefix}.k.b"])
    v, _ = linear_fwd(xkv, p[f"{prefix}.v.w"], p[f"{prefix}.v.b"])
    qh, kh, vh = split_heads(q, heads), split_heads(k, heads), split_heads(v, heads)
    scale = 1.0 / np.sqrt(qh.shape[-1])
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    if causal:
        tq, tk = scores.shape[-2:]
        future = np.triu(np.ones((tq, tk), dtype=bool), k=1 + tk - tq)
        scores = np.where(future, -np.inf, scores)
    attn = softmax(scores)
    ctx = merge_heads(attn @ vh)
    out, _ = linear_fwd(ctx, p[f"{prefix}.o.w"], p[f"{prefix}.o.b"])
    cache = (xq, xkv, qh, kh, vh, attn, ctx, scale, heads)
    return out, cache


def mha_bwd(dout, cache, p, prefix, grads):
    xq, xkv, qh, kh, vh, attn, ctx, scale, heads = cache
    dctx, dw, db = linear_bwd(dout, ctx, p[f"{prefix}.o.w"])
    grads[f"{prefix}.o.w"], grads[f"{prefix}.o.b"] = dw, db
    dctx_h = split_heads(dctx, heads)
    dattn = dctx_h @ vh.transpose(0, 1, 3, 2)
    dvh = attn.transpose(0, 1, 3, 2) @ dctx_h
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True)) * scale
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 1, 3, 2) @ qh
    dxq, dw, db = linear_bwd(merge_heads(dqh), xq, p[f"{prefix}.q.w"])
    grads[f"{prefix}.q.w"], grads[f"{prefix}.q.b"] = dw, db
    dxk, dw, db = linear_bwd(merge_heads(dkh), xkv, p[f"{prefix}.k.w"])
    grads[f"{prefix}.k.w"], grads[f"{prefix}.k.b"] = dw, db
    dxv, dw, db = linear_bwd(merge_heads(dvh), xkv, p[f"{prefix}.v.w"])
    grads[f"{prefix}.v.w"], grads[f"{prefix}.v.b"] = dw, db
    return dxq, dxk + dxv


# -- convolution -------------------------------------------------------------


def conv2d_fwd(x, w, b, stride=1, pad=0):
    """``x``: (B, C, H, W); ``w``: (O, C, k, k)."""
    k = w.shape[-1]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    out += b[None, :, None, None]
    return np.ascontiguousarray(out), (xp.shape, win, stride, pad)


def conv2d_bwd(dy, cache, w):
    xp_shape, win, stride, pad = cache
    k = w.shape[-1]
    ho, wo = dy.shape[2:]
    dw = np.tensordot(dy, win, axes=([0, 2, 3], [0, 2, 3]))
    db = dy.sum(axis=(0, 2, 3))
    dxp = np.zeros(xp_shape, dtype=dy.dtype)
    for i in range(k):
        for j in range(k):
            contrib = np.tensordot(dy, w[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += contrib
    dx = dxp[:, :, pad:xp_shape[2] - pad, pad:xp_shape[3] - pad] if pad else dxp
    return dx, dw, db
