"""Batch inference and the evaluation report."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..codec import tree_to_edges
from ..constraints import DEFAULT_RULES, ConstraintRules, validate_tree
from ..errors import EmptyDataset, ShapeMismatch
from ..nn.decoder import decoder_forward
from ..nn.decoding import constrained_decode
from ..nn.encoder import cnn_encode
from ..nn.training import Batch
from ..nn.weights import MEMORY_ROWS, MEMORY_WIDTH, ModelWeights
from ..samples import LcuSample
from .parallel import chunked, parallel_map

MEMORY_SOURCES = ("encoder", "labels")
TIMING_KEYS = frozenset({"infer_seconds", "mean_inference_seconds", "total_seconds", "threads"})
CHUNK = 64  # fixed so results do not depend on the worker count


@dataclass(frozen=True)
class Prediction:
    index: int
    tokens: list[int]
    edge_probs: np.ndarray  # memory fed to the decoder, flattened (480,)
    decoded_edges: np.ndarray  # edges of the decoded tree (480,) uint8
    legal: bool
    infer_seconds: float
    teacher_hits: int = 0
    teacher_tokens: int = 0


_state: dict = {}


def _init(w: ModelWeights, rules: ConstraintRules, memory: str) -> None:
    _state.update(w=w, rules=rules, memory=memory)
    # load the compiled decoder before anything is timed
    constrained_decode(np.zeros((MEMORY_ROWS, MEMORY_WIDTH), dtype=w.dtype), w, rules)


def _memories(samples: Sequence[LcuSample], w: ModelWeights, memory: str) -> np.ndarray:
    if memory == "labels":
        return np.stack([np.asarray(s.edge_labels, dtype=w.dtype) for s in samples])
    return cnn_encode(np.stack([s.pixels for s in samples]), [s.qp for s in samples], w)


def _teacher_hits(samples, mem, w) -> list[tuple[int, int]]:
    labelled = [i for i, s in enumerate(samples) if s.mode_labels]
    out = [(0, 0)] * len(samples)
    if not labelled:
        return out
    batch = Batch.from_samples([samples[i] for i in labelled], w.config.max_seq)
    logits, _ = decoder_forward(mem[labelled].reshape(-1, MEMORY_ROWS, MEMORY_WIDTH), batch.tokens_in, w)
    hits = ((logits.argmax(-1) == batch.targets) & batch.valid).sum(axis=1)
    for j, i in enumerate(labelled):
        out[i] = (int(hits[j]), int(batch.valid[j].sum()))
    return out


def _run_chunk(job) -> list[Prediction]:
    start, samples = job
    w, rules, memory = _state["w"], _state["rules"], _state["memory"]
    t0 = time.perf_counter()
    mem = _memories(samples, w, memory)
    share = (time.perf_counter() - t0) / len(samples)
    teacher = _teacher_hits(samples, mem, w)
    preds = []
    for k, s in enumerate(samples):
        t1 = time.perf_counter()
        tree, tokens = constrained_decode(mem[k].reshape(MEMORY_ROWS, MEMORY_WIDTH), w, rules)
        dt = time.perf_counter() - t1 + share
        preds.append(Prediction(
            start + k, tokens, mem[k].reshape(-1), tree_to_edges(tree), validate_tree(tree, rules), dt, *teacher[k]
        ))
    return preds


def infer(
    samples: Sequence[LcuSample],
    w: ModelWeights,
    rules: ConstraintRules = DEFAULT_RULES,
    memory: str = "encoder",
    threads: int | None = None,
) -> list[Prediction]:
    """Decode every record; chunks of :data:`CHUNK` are spread over workers."""
    if memory not in MEMORY_SOURCES:
        raise ValueError(f"memory must be one of {MEMORY_SOURCES}")
    if not samples:
        raise EmptyDataset("no records to run")
    for s in samples:
        if np.asarray(s.pixels).shape != (66, 66):
            raise ShapeMismatch("records must hold 66x66 blocks")
    jobs = [(i * CHUNK, c) for i, c in enumerate(chunked(list(samples), CHUNK))]
    out = parallel_map(_run_chunk, jobs, threads, initializer=_init, initargs=(w, rules, memory))
    return [p for chunk in out for p in chunk]


def _ratio(num: int, den: int):
    return num / den if den else None


def eval_model(
    samples: Sequence[LcuSample],
    w: ModelWeights,
    rules: ConstraintRules = DEFAULT_RULES,
    memory: str = "encoder",
    threshold: float = 0.5,
    threads: int | None = None,
) -> dict:
    """JSON-ready report against the records' labels.

    Token accuracy is teacher-forced (unmasked argmax over label prefixes);
    exact match compares the constrained decode with the label sequence;
    edge precision/recall threshold the decoder memory at ``threshold``.
    Aggregates pool counts over all records.
    """
    if not samples:
        raise EmptyDataset("empty dataset")
    if any(not s.mode_labels for s in samples):
        raise ValueError("every record needs labels; run `label` first")
    t0 = time.perf_counter()
    preds = infer(samples, w, rules, memory, threads)
    total = time.perf_counter() - t0
    per, tp_all, fp_all, fn_all = [], 0, 0, 0
    for s, p in zip(samples, preds):
        pred = p.edge_probs >= threshold
        true = np.asarray(s.edge_labels).astype(bool)
        tp = int((pred & true).sum())
        fp = int((pred & ~true).sum())
        fn = int((~pred & true).sum())
        tp_all, fp_all, fn_all = tp_all + tp, fp_all + fp, fn_all + fn
        per.append({
            "index": p.index,
            "frame": s.frame_index,
            "x": s.lcu_x,
            "y": s.lcu_y,
            "qp": s.qp,
            "token_accuracy": p.teacher_hits / p.teacher_tokens,
            "exact_tree_match": p.tokens == list(s.mode_labels),
            "legal": p.legal,
            "edge_precision": _ratio(tp, tp + fp),
            "edge_recall": _ratio(tp, tp + fn),
            "decoded_edges_match": bool(np.array_equal(p.decoded_edges.astype(bool), true)),
            "infer_seconds": p.infer_seconds,
        })
    n = len(samples)
    return {
        "count": n,
        "memory": memory,
        "token_accuracy": sum(p.teacher_hits for p in preds) / sum(p.teacher_tokens for p in preds),
        "exact_tree_match": sum(r["exact_tree_match"] for r in per) / n,
        "all_legal": all(r["legal"] for r in per),
        "edge_precision": _ratio(tp_all, tp_all + fp_all),
        "edge_recall": _ratio(tp_all, tp_all + fn_all),
        "mean_inference_seconds": sum(p.infer_seconds for p in preds) / n,
        "total_seconds": total,
        "per_sample": per,
    }


def strip_timing(report: dict) -> dict:
    """Report without wall-clock fields, for comparing runs."""
    out = {k: v for k, v in report.items() if k not in TIMING_KEYS}
    if "per_sample" in out:
        out["per_sample"] = [{k: v for k, v in r.items() if k not in TIMING_KEYS} for r in out["per_sample"]]
    return out


def predictions_json(preds: Sequence[Prediction]) -> list[dict]:
    return [
        {"index": p.index, "tokens": p.tokens, "legal": p.legal, "infer_seconds": p.infer_seconds}
        for p in preds
    ]
