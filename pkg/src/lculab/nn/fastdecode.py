"""Compiled single-sequence constrained decoder.

Legality is not re-implemented here: every CU reachable from the root is
enumerated once with :func:`~lculab.constraints.allowed_modes` and
:func:`~lculab.partition.child_rects` into integer tables, and the kernel
only indexes them. Results match :mod:`lculab.nn.decoding` token for token
(up to float rounding in the last place).
"""
from __future__ import annotations

import math
from functools import lru_cache

import numba
import numpy as np

from ..constraints import DEFAULT_RULES, ConstraintRules, allowed_modes
from ..errors import SequenceTooLong, ShapeMismatch
from ..partition import CuRect, PartitionTree, SplitMode, child_rects
from .decoder import _check_memory
from .ops import sinusoidal
from .weights import MEMORY_ROWS, MEMORY_WIDTH, ModelWeights

_LAYER_KEYS = [
    "self.q.w", "self.q.b", "self.k.w", "self.k.b", "self.v.w", "self.v.b", "self.o.w", "self.o.b",
    "cross.q.w", "cross.q.b", "cross.k.w", "cross.k.b", "cross.v.w", "cross.v.b", "cross.o.w", "cross.o.b",
    "ln1.g", "ln1.b", "ln2.g", "ln2.b", "ln3.g", "ln3.b",
    "ffn.w1", "ffn.b1", "ffn.w2", "ffn.b2",
]


@lru_cache(maxsize=8)
def _cu_index(rules: ConstraintRules):
    root = CuRect.root(rules.lcu_size)
    ids = {root: 0}
    order = [root]
    i = 0
    while i < len(order):
        cu = order[i]
        i += 1
        for mode in allowed_modes(cu, rules).modes():
            if mode != SplitMode.NS:
                for k in child_rects(cu, mode):
                    if k not in ids:
                        ids[k] = len(order)
                        order.append(k)
    n = len(order)
    masks = np.zeros((n, 6), dtype=np.bool_)
    children = np.full((n, 6, 4), -1, dtype=np.int32)
    for cu, idx in ids.items():
        masks[idx] = allowed_modes(cu, rules).as_array()
        for mode in allowed_modes(cu, rules).modes():
            if mode != SplitMode.NS:
                for j, k in enumerate(child_rects(cu, mode)):
                    children[idx, mode, j] = ids[k]
    counts = np.array([0, 4, 2, 2, 4, 4], dtype=np.int32)
    leaves = [PartitionTree.leaf(cu) for cu in order]  # immutable, shared between trees
    return order, leaves, masks, children, counts, children.tolist()


def cu_table(rules: ConstraintRules):
    """``(masks (n, 6) bool, children (n, 6, 4) int32, child counts (6,))``; CU 0 is the root."""
    _, _, masks, children, counts, _ = _cu_index(rules)
    return masks, children, counts


_MODES = tuple(SplitMode)
_ARITY = (0, 4, 2, 2, 4, 4)


def tree_from_tokens(tokens: list[int], rules: ConstraintRules = DEFAULT_RULES) -> PartitionTree:
    """Rebuild the tree of a kernel-emitted sequence from the CU table.

    The kernel only ever emits table entries, so no legality check is
    repeated here; :func:`~lculab.codec.modes_to_tree` is the checked parser.
    """
    order, leaves, _, _, _, kids = _cu_index(rules)
    it = iter(tokens)

    def build(cu: int) -> PartitionTree:
        m = next(it)
        if m == 0:
            return leaves[cu]
        row = kids[cu][m]
        return PartitionTree(order[cu], _MODES[m], tuple([build(row[j]) for j in range(_ARITY[m])]))

    return build(0)


_TRANSPOSED = {"self.q.w", "self.k.w", "self.v.w", "self.o.w", "cross.q.w", "cross.o.w", "ffn.w1", "ffn.w2"}


def pack_decoder(tensors: dict, cfg) -> tuple:
    """Per-layer tensors stacked on a leading layer axis, kernel argument order.

    Square and feed-forward matrices are stored transposed (out, in) so each
    output is a contiguous dot product.
    """
    out = []
    for k in _LAYER_KEYS:
        first = tensors[f"dec.l0.{k}"]
        t = k in _TRANSPOSED
        arr = np.empty((cfg.decoder_layers,) + (first.shape[::-1] if t else first.shape), first.dtype)
        for i in range(cfg.decoder_layers):
            src = tensors[f"dec.l{i}.{k}"]
            if src.shape != first.shape:
                raise ShapeMismatch(f"dec.l{i}.{k} has shape {src.shape}, layer 0 has {first.shape}")
            arr[i] = src.T if t else src
        out.append(arr)
    return tuple(out) + (
        np.ascontiguousarray(tensors["dec.embed"]),
        np.ascontiguousarray(tensors["dec.out.w"].T),
        np.ascontiguousarray(tensors["dec.out.b"]),
    )


@numba.njit(cache=True, fastmath=True)
def _matvec(wt, x, b, out):
    # out = wt @ x + b, wt is (out, in)
    n_out, n_in = wt.shape
    for j in range(n_out):
        s = b[j]
        for i in range(n_in):
            s += wt[j, i] * x[i]
        out[j] = s


@numba.njit(cache=True, fastmath=True)
def _layernorm(x, g, b, k):
    d = x.shape[0]
    mu = k[6]
    for i in range(d):
        mu += x[i]
    mu /= d
    var = k[6]
    for i in range(d):
        var += (x[i] - mu) * (x[i] - mu)
    var /= d
    r = k[5] / math.sqrt(var + k[1])
    for i in range(d):
        x[i] = (x[i] - mu) * r * g[i] + b[i]


_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_LOG2E = 1.44269504088896338700


@numba.njit(cache=True, fastmath={"nsz", "contract", "arcp", "nnan", "ninf"})
def _exp_inplace(x, n, bits):
    # exp of non-positive float64 values, vectorizable: Cody-Waite reduction,
    # degree-12 Taylor polynomial, 2**k built from the exponent bits.
    # Relative error about 3e-16; no reassociation allowed here.
    scale = bits.view(np.float64)
    for j in range(n):
        v = max(x[j], -700.0)
        kf = math.floor(v * _LOG2E + 0.5)
        r = (v - kf * _LN2_HI) - kf * _LN2_LO
        p = r * (1.0 / 39916800.0 + r * (1.0 / 479001600.0))
        p = r * (1.0 / 362880.0 + r * (1.0 / 3628800.0 + p))
        p = r * (1.0 / 5040.0 + r * (1.0 / 40320.0 + p))
        p = r * (1.0 / 120.0 + r * (1.0 / 720.0 + p))
        p = r * (1.0 / 6.0 + r * (1.0 / 24.0 + p))
        x[j] = 1.0 + r * (1.0 + r * (0.5 + p))
        bits[j] = (np.int64(kf) + 1023) << 52
    for j in range(n):
        x[j] *= scale[j]


@numba.njit(cache=True, fastmath=True)
def _attend(q, kt, vt, n, heads, ctx, scores, k, ebuf, bits):
    # kt, vt: (d, capacity), keys/values along the last axis
    d = q.shape[0]
    dh = d // heads
    for h in range(heads):
        row = scores[h]
        for j in range(n):
            row[j] = k[6]
        for c in range(h * dh, (h + 1) * dh):
            qc = q[c]
            kc = kt[c]
            for j in range(n):
                row[j] += qc * kc[j]
        mx = row[0] * k[0]
        for j in range(n):
            row[j] *= k[0]
            if row[j] > mx:
                mx = row[j]
        for j in range(n):
            ebuf[j] = row[j] - mx
        _exp_inplace(ebuf, n, bits)
        tot = k[6]
        for j in range(n):
            row[j] = ebuf[j]
            tot += row[j]
        for c in range(h * dh, (h + 1) * dh):
            vc = vt[c]
            s = k[6]
            for j in range(n):
                s += row[j] * vc[j]
            ctx[c] = s / tot


@numba.njit(cache=True, fastmath=True)
def _decode_kernel(
    mem, pe, k, heads, max_seq, masks, children, counts,
    sqw, sqb, skw, skb, svw, svb, sow, sob,
    cqw, cqb, ckw, ckb, cvw, cvb, cow, cob,
    g1, b1, g2, b2, g3, b3,
    fw1, fb1, fw2, fb2,
    embed, outw, outb, tokens_out,
):
    L, d, _ = sqw.shape
    f = fw1.shape[1]
    rows = mem.shape[0]
    dt = mem.dtype
    ckt = np.empty((L, d, rows), dt)
    cvt = np.empty((L, d, rows), dt)
    for l in range(L):
        for c in range(d):
            for r in range(rows):
                sk = ckb[l, c]
                sv = cvb[l, c]
                for i in range(mem.shape[1]):
                    sk += mem[r, i] * ckw[l, i, c]
                    sv += mem[r, i] * cvw[l, i, c]
                ckt[l, c, r] = sk
                cvt[l, c, r] = sv
    kt = np.empty((L, d, max_seq), dt)
    vt = np.empty((L, d, max_seq), dt)
    x = np.empty(d, dt)
    q = np.empty(d, dt)
    kv = np.empty(d, dt)
    a = np.empty(d, dt)
    ctx = np.empty(d, dt)
    hid = np.empty(f, dt)
    scores = np.empty((heads, max(max_seq, rows)), dt)
    logits = np.empty(outw.shape[0], dt)
    ebuf = np.empty(max(max_seq, rows), np.float64)
    bits = np.empty(max(max_seq, rows), np.int64)
    stack = np.empty(4 * max_seq + 4, np.int32)
    stack[0] = 0
    sp = 1
    tok = 6  # BOS
    t = 0
    while sp > 0:
        if t >= max_seq:
            return -1
        for c in range(d):
            x[c] = embed[tok, c] + pe[t, c]
        for l in range(L):
            _matvec(sqw[l], x, sqb[l], q)
            _matvec(skw[l], x, skb[l], kv)
            for c in range(d):
                kt[l, c, t] = kv[c]
            _matvec(svw[l], x, svb[l], kv)
            for c in range(d):
                vt[l, c, t] = kv[c]
            _attend(q, kt[l], vt[l], t + 1, heads, ctx, scores, k, ebuf, bits)
            _matvec(sow[l], ctx, sob[l], a)
            for c in range(d):
                x[c] += a[c]
            _layernorm(x, g1[l], b1[l], k)
            _matvec(cqw[l], x, cqb[l], q)
            _attend(q, ckt[l], cvt[l], rows, heads, ctx, scores, k, ebuf, bits)
            _matvec(cow[l], ctx, cob[l], a)
            for c in range(d):
                x[c] += a[c]
            _layernorm(x, g2[l], b2[l], k)
            _matvec(fw1[l], x, fb1[l], hid)
            for c in range(f):
                hc = hid[c]
                hid[c] = hc * k[2] * (k[5] + math.erf(hc * k[3]))
            _matvec(fw2[l], hid, fb2[l], a)
            for c in range(d):
                x[c] += a[c]
            _layernorm(x, g3[l], b3[l], k)
        _matvec(outw, x, outb, logits)
        sp -= 1
        cu = stack[sp]
        # compare rounded probabilities, not logits, so ties break as in
        # the reference decoder
        mx = logits[0]
        for m in range(1, 6):
            if logits[m] > mx:
                mx = logits[m]
        tot = k[6]
        for m in range(6):
            logits[m] = math.exp(logits[m] - mx)
            tot += logits[m]
        best = 0
        best_p = -k[5]
        for m in range(6):
            if masks[cu, m]:
                p = logits[m] / tot
                if p > best_p:
                    best_p = p
                    best = m
        tokens_out[t] = best
        t += 1
        for j in range(counts[best] - 1, -1, -1):
            stack[sp] = children[cu, best, j]
            sp += 1
        tok = best
    return t


def _constants(cfg, dtype) -> np.ndarray:
    # typed scalars so float32 models stay in float32 inside the kernel:
    # [attention scale, LN eps, 0.5, 1/sqrt(2), (unused), 1.0, 0.0]
    dh = cfg.model_dim // cfg.heads
    return np.array([1.0 / math.sqrt(dh), 1e-5, 0.5, 1.0 / math.sqrt(2.0), 0.0, 1.0, 0.0], dtype=dtype)


def fast_decode_tokens(memory, w: ModelWeights, rules: ConstraintRules = DEFAULT_RULES, packed=None) -> list[int]:
    """Constrained greedy decode of one (30, 16) memory; returns the mode sequence.

    ``packed`` (from :func:`pack_decoder`) substitutes another decoder's
    tensors of the same config and dtype.
    """
    cfg = w.config
    dtype = w.dtype
    mem = _check_memory(memory)
    if mem.shape[0] != 1:
        raise ShapeMismatch("fast_decode_tokens takes a single memory")
    mem = mem[0].astype(dtype)
    mem = np.ascontiguousarray(mem + sinusoidal(MEMORY_ROWS, MEMORY_WIDTH, dtype))
    pe = _pe(cfg.max_seq, cfg.model_dim, np.dtype(dtype).str)
    masks, children, counts = cu_table(rules)
    out = np.empty(cfg.max_seq, dtype=np.int64)
    args = packed if packed is not None else pack_decoder(w.tensors, cfg)
    n = _decode_kernel(mem, pe, _constants(cfg, dtype), cfg.heads, cfg.max_seq, masks, children, counts, *args, out)
    if n < 0:
        raise SequenceTooLong(f"decoding exceeded max_seq={cfg.max_seq}")
    return out[:n].tolist()


@lru_cache(maxsize=8)
def _pe(max_seq: int, dim: int, dtype_str: str) -> np.ndarray:
    return sinusoidal(max_seq, dim, np.dtype(dtype_str))


def fast_constrained_decode(memory, w: ModelWeights, rules: ConstraintRules = DEFAULT_RULES, packed=None):
    tokens = fast_decode_tokens(memory, w, rules, packed)
    return tree_from_tokens(tokens, rules), tokens
