"""Transformer decoder over the (30, 16) edge memory.

Post-LN layers: masked self-attention, encoder-decoder attention where
the 30 memory rows are keys/values, then a GELU feed-forward block. The
query sequence is ``BOS, l_0, ..., l_{t-1}``; position ``t`` predicts
``l_t``. Sinusoidal encodings are added to both tokens and memory rows.
"""
from __future__ import annotations

import numpy as np

from ..errors import SequenceTooLong, ShapeMismatch
from .ops import (
    gelu,
    gelu_bwd,
    gelu_fwd,
    layernorm_bwd,
    layernorm_fwd,
    linear_bwd,
    linear_fwd,
    merge_heads,
    mha_bwd,
    mha_fwd,
    sinusoidal,
    softmax,
    split_heads,
)
from .weights import BOS, MEMORY_ROWS, MEMORY_WIDTH, ModelWeights


def shift_right(tokens: list[int]) -> list[int]:
    return [BOS] + list(tokens[:-1])


def _check_memory(memory: np.ndarray) -> np.ndarray:
    m = np.asarray(memory)
    if m.ndim == 2:
        m = m[None]
    if m.shape[1:] != (MEMORY_ROWS, MEMORY_WIDTH):
        raise ShapeMismatch(f"memory must be (B, 30, 16), got {m.shape}")
    return m


def decoder_forward(memory, tokens_in, w: ModelWeights):
    """Teacher-forced pass. ``tokens_in``: (B, T) ints starting with BOS.

    Returns ``(logits (B, T, 6), cache)``.
    """
    cfg = w.config
    dtype = w.dtype
    mem = _check_memory(memory).astype(dtype)
    tokens_in = np.asarray(tokens_in)
    T = tokens_in.shape[1]
    if T > cfg.max_seq:
        raise SequenceTooLong(f"{T} tokens exceed max_seq={cfg.max_seq}")
    mem_in = mem + sinusoidal(MEMORY_ROWS, MEMORY_WIDTH, dtype)
    x = w["dec.embed"][tokens_in] + sinusoidal(T, cfg.model_dim, dtype)
    layers = []
    for i in range(cfg.decoder_layers):
        p = f"dec.l{i}"
        c = {}
        a, c["self"] = mha_fwd(x, x, w.tensors, f"{p}.self", cfg.heads, causal=True)
        x, c["ln1"] = layernorm_fwd(x + a, w[f"{p}.ln1.g"], w[f"{p}.ln1.b"])
        a, c["cross"] = mha_fwd(x, mem_in, w.tensors, f"{p}.cross", cfg.heads, causal=False)
        x, c["ln2"] = layernorm_fwd(x + a, w[f"{p}.ln2.g"], w[f"{p}.ln2.b"])
        c["ffn_in"] = x
        hdn, _ = linear_fwd(x, w[f"{p}.ffn.w1"], w[f"{p}.ffn.b1"])
        hdn, c["act"] = gelu_fwd(hdn)
        c["ffn_hidden"] = hdn
        f, _ = linear_fwd(hdn, w[f"{p}.ffn.w2"], w[f"{p}.ffn.b2"])
        x, c["ln3"] = layernorm_fwd(x + f, w[f"{p}.ln3.g"], w[f"{p}.ln3.b"])
        layers.append(c)
    logits, _ = linear_fwd(x, w["dec.out.w"], w["dec.out.b"])
    return logits, (tokens_in, x, layers)


def decoder_backward(dlogits, cache, w: ModelWeights, grads: dict) -> np.ndarray:
    """Accumulate decoder gradients into ``grads``; returns d(memory)."""
    tokens_in, x_out, layers = cache
    cfg = w.config
    dx, grads["dec.out.w"], grads["dec.out.b"] = linear_bwd(dlogits, x_out, w["dec.out.w"])
    dmem = np.zeros((dlogits.shape[0], MEMORY_ROWS, MEMORY_WIDTH), dtype=dlogits.dtype)
    for i in reversed(range(cfg.decoder_layers)):
        p = f"dec.l{i}"
        c = layers[i]
        dsum, grads[f"{p}.ln3.g"], grads[f"{p}.ln3.b"] = layernorm_bwd(dx, c["ln3"])
        dh, grads[f"{p}.ffn.w2"], grads[f"{p}.ffn.b2"] = linear_bwd(dsum, c["ffn_hidden"], w[f"{p}.ffn.w2"])
        dh = gelu_bwd(dh, c["act"])
        dffn_in, grads[f"{p}.ffn.w1"], grads[f"{p}.ffn.b1"] = linear_bwd(dh, c["ffn_in"], w[f"{p}.ffn.w1"])
        dx = dsum + dffn_in
        dsum, grads[f"{p}.ln2.g"], grads[f"{p}.ln2.b"] = layernorm_bwd(dx, c["ln2"])
        dq, dkv = mha_bwd(dsum, c["cross"], w.tensors, f"{p}.cross", grads)
        dmem += dkv
        dx = dsum + dq
        dsum, grads[f"{p}.ln1.g"], grads[f"{p}.ln1.b"] = layernorm_bwd(dx, c["ln1"])
        dq, dkv = mha_bwd(dsum, c["self"], w.tensors, f"{p}.self", grads)
        dx = dsum + dq + dkv
    demb = np.zeros_like(w["dec.embed"])
    np.add.at(demb, tokens_in, dx)
    grads["dec.embed"] = demb
    return dmem


def teacher_forced_probs(memory, tokens: list[int], w: ModelWeights) -> np.ndarray:
    """Per-position mode probabilities (T, 6) for one label sequence."""
    logits, _ = decoder_forward(memory, np.array([shift_right(tokens)]), w)
    return softmax(logits[0])


# -- incremental inference ---------------------------------------------------


def stack_tensors(weights: list) -> dict[str, np.ndarray]:
    """Stack several decoders along a leading batch axis for lock-step decoding.

    Accepts :class:`ModelWeights` or plain ``name -> array`` dicts; only
    ``dec.*`` tensors are used. Matrices become (B, in, out) and vectors
    (B, 1, n) so they broadcast against activations of shape (B, 1, d).
    """
    dicts = [w.tensors if isinstance(w, ModelWeights) else w for w in weights]
    out = {}
    for name in dicts[0]:
        if not name.startswith("dec."):
            continue
        arr = np.stack([d[name] for d in dicts])
        out[name] = arr[:, None, :] if arr.ndim == 2 and name != "dec.embed" else arr
    return out


class DecoderStepper:
    """Key/value-cached decoder that advances B sequences one token at a time.

    ``params`` is either a single model's tensors or the output of
    :func:`stack_tensors` (one model per sequence).
    """

    def __init__(self, memory, w: ModelWeights, params: dict | None = None):
        cfg = w.config
        self.cfg = cfg
        self.dtype = w.dtype
        self.p = params if params is not None else w.tensors
        self.stacked = self.p["dec.embed"].ndim == 3
        mem = _check_memory(memory).astype(self.dtype) + sinusoidal(MEMORY_ROWS, MEMORY_WIDTH, self.dtype)
        self.B = mem.shape[0]
        self.pe = sinusoidal(cfg.max_seq, cfg.model_dim, self.dtype)
        self.t = 0
        self.cross_kv = []
        for i in range(cfg.decoder_layers):
            pre = f"dec.l{i}.cross"
            k = mem @ self.p[f"{pre}.k.w"] + self.p[f"{pre}.k.b"]
            v = mem @ self.p[f"{pre}.v.w"] + self.p[f"{pre}.v.b"]
            self.cross_kv.append((split_heads(k, cfg.heads), split_heads(v, cfg.heads)))
        dh = cfg.model_dim // cfg.heads
        self.cap = 16
        self.self_k = [np.zeros((self.B, cfg.heads, self.cap, dh), self.dtype) for _ in range(cfg.decoder_layers)]
        self.self_v = [np.zeros_like(k) for k in self.self_k]

    def _grow(self) -> None:
        self.cap *= 2
        pad = lambda a: np.concatenate([a, np.zeros_like(a)], axis=2)
        self.self_k = [pad(a) for a in self.self_k]
        self.self_v = [pad(a) for a in self.self_v]

    def take(self, idx: np.ndarray) -> None:
        """Keep only the sequences at ``idx`` (in that order)."""
        self.B = len(idx)
        self.cross_kv = [(k[idx], v[idx]) for k, v in self.cross_kv]
        self.self_k = [a[idx] for a in self.self_k]
        self.self_v = [a[idx] for a in self.self_v]
        if self.stacked:
            self.p = {k: v[idx] for k, v in self.p.items()}

    def _attend(self, x, prefix, keys, values):
        p, h = self.p, self.cfg.heads
        q = split_heads(x @ p[f"{prefix}.q.w"] + p[f"{prefix}.q.b"], h)
        scores = (q @ keys.transpose(0, 1, 3, 2)) / np.sqrt(q.shape[-1]).astype(self.dtype)
        ctx = merge_heads(softmax(scores) @ values)
        return ctx @ p[f"{prefix}.o.w"] + p[f"{prefix}.o.b"]

    def step(self, tokens) -> np.ndarray:
        """Feed one token per sequence; returns probabilities (B, 6)."""
        if self.t >= self.cfg.max_seq:
            raise SequenceTooLong(f"decoder history exceeds max_seq={self.cfg.max_seq}")
        if self.t >= self.cap:
            self._grow()
        p, h, t = self.p, self.cfg.heads, self.t
        tokens = np.asarray(tokens)
        emb = p["dec.embed"][np.arange(self.B), tokens] if self.stacked else p["dec.embed"][tokens]
        x = (emb + self.pe[t])[:, None, :]
        for i in range(self.cfg.decoder_layers):
            pre = f"dec.l{i}"
            k = split_heads(x @ p[f"{pre}.self.k.w"] + p[f"{pre}.self.k.b"], h)
            v = split_heads(x @ p[f"{pre}.self.v.w"] + p[f"{pre}.self.v.b"], h)
            self.self_k[i][:, :, t] = k[:, :, 0]
            self.self_v[i][:, :, t] = v[:, :, 0]
            a = self._attend(x, f"{pre}.self", self.self_k[i][:, :, :t + 1], self.self_v[i][:, :, :t + 1])
            x, _ = layernorm_fwd(x + a, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
            a = self._attend(x, f"{pre}.cross", *self.cross_kv[i])
            x, _ = layernorm_fwd(x + a, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
            f = gelu(x @ p[f"{pre}.ffn.w1"] + p[f"{pre}.ffn.b1"]) @ p[f"{pre}.ffn.w2"] + p[f"{pre}.ffn.b2"]
            x, _ = layernorm_fwd(x + f, p[f"{pre}.ln3.g"], p[f"{pre}.ln3.b"])
        logits = x @ p["dec.out.w"] + p["dec.out.b"]
        self.t += 1
        return softmax(logits[:, 0, :])


def decoder_step(memory, history: list[int], w: ModelWeights) -> np.ndarray:
    """Mode probabilities for the next token after ``history`` (6,)."""
    if len(history) >= w.config.max_seq:
        raise SequenceTooLong(f"history of {len(history)} tokens leaves no room under max_seq")
    stepper = DecoderStepper(memory, w)
    probs = None
    for tok in [BOS] + list(history):
        probs = stepper.step([tok])
    return probs[0]
