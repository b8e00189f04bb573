"""Greedy constrained decoding: decoder probabilities filtered by the BPC rules."""
from __future__ import annotations

import numpy as np

from ..codec import modes_to_tree
from ..constraints import DEFAULT_RULES, ConstraintRules, allowed_modes, masked_argmax_batch
from ..errors import SequenceTooLong
from ..partition import CuRect, PartitionTree, SplitMode, child_rects
from .decoder import DecoderStepper, _check_memory, stack_tensors
from .fastdecode import fast_decode_tokens, pack_decoder, tree_from_tokens
from .weights import BOS, ModelWeights


def _decode_lockstep(memory, w: ModelWeights, rules: ConstraintRules, params=None) -> list[list[int]]:
    stepper = DecoderStepper(memory, w, params)
    n = stepper.B
    pending: list[list[CuRect]] = [[CuRect.root(rules.lcu_size)] for _ in range(n)]
    emitted: list[list[int]] = [[] for _ in range(n)]
    last = np.full(n, BOS)
    active = np.arange(n)  # sequence ids, aligned with the stepper rows
    mask_cache: dict[CuRect, np.ndarray] = {}
    while len(active):
        if stepper.t >= w.config.max_seq:
            raise SequenceTooLong(f"decoding exceeded max_seq={w.config.max_seq}")
        probs = stepper.step(last)
        cus = [pending[s].pop() for s in active]
        masks = np.empty((len(active), 6), dtype=bool)
        for r, cu in enumerate(cus):
            m = mask_cache.get(cu)
            if m is None:
                m = mask_cache[cu] = allowed_modes(cu, rules).as_array()
            masks[r] = m
        choice = masked_argmax_batch(probs, masks)
        keep = []
        for r, (s, cu, mode) in enumerate(zip(active, cus, choice)):
            emitted[s].append(int(mode))
            if mode != SplitMode.NS:
                pending[s].extend(reversed(child_rects(cu, mode)))
            if pending[s]:
                keep.append(r)
        last = choice
        if len(keep) < len(active):
            keep = np.array(keep, dtype=int)
            active, last = active[keep], last[keep]
            if len(keep):
                stepper.take(keep)
    return emitted


BACKENDS = ("compiled", "reference")


def _decode_compiled(memory, w: ModelWeights, rules: ConstraintRules, per_sequence_weights) -> list[list[int]]:
    shared = None if per_sequence_weights else pack_decoder(w.tensors, w.config)
    seqs = []
    for i, mem in enumerate(memory):
        if per_sequence_weights:
            other = per_sequence_weights[i]
            packed = pack_decoder(other.tensors if isinstance(other, ModelWeights) else other, w.config)
        else:
            packed = shared
        seqs.append(fast_decode_tokens(mem, w, rules, packed))
    return seqs


def constrained_decode_batch(
    memory,
    w: ModelWeights,
    rules: ConstraintRules = DEFAULT_RULES,
    per_sequence_weights: list | None = None,
    backend: str = "compiled",
) -> list[tuple[PartitionTree, list[int]]]:
    """Decode a batch of memories (B, 30, 16).

    With ``per_sequence_weights`` (models or decoder-tensor dicts) each
    sequence runs under its own decoder, all sharing ``w``'s config.
    ``backend="reference"`` uses the numpy lock-step decoder, which the
    compiled kernel is tested against.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    memory = _check_memory(memory)
    if per_sequence_weights is not None and len(per_sequence_weights) != len(memory):
        raise ValueError("need one weight set per memory")
    if backend == "compiled":
        seqs = _decode_compiled(memory, w, rules, per_sequence_weights)
        return [(tree_from_tokens(s, rules), s) for s in seqs]
    params = stack_tensors(per_sequence_weights) if per_sequence_weights else None
    seqs = _decode_lockstep(memory, w, rules, params)
    return [(modes_to_tree(s, rules), s) for s in seqs]


def constrained_decode(memory, w: ModelWeights, rules: ConstraintRules = DEFAULT_RULES, backend: str = "compiled"):
    """Decode one (30, 16) memory to ``(tree, mode sequence)``."""
    return constrained_decode_batch(np.asarray(memory)[None], w, rules, backend=backend)[0]
