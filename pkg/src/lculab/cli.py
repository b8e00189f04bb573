"""``lculab`` command line."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .constraints import DEFAULT_RULES
from .errors import LcuLabError
from .nn.config import ModelConfig
from .nn.training import TrainConfig, train
from .nn.weights import init_weights, load_weights, save_weights
from .pipeline.dataset import LabelConfig, balance_dataset, deep_fraction, extract_samples, label_samples, read_dataset, write_dataset
from .pipeline.evaluate import eval_model, infer, predictions_json
from .pipeline.metrics import TimingRecord, bd_rate, read_curve, time_saving
from .pipeline.yuv import parse_size

log = logging.getLogger("lculab")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _train_config(section: dict, **overrides) -> TrainConfig:
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(section) - known
    if unknown:
        raise ValueError(f"unknown train settings {sorted(unknown)}")
    values = {**section, **{k: v for k, v in overrides.items() if v is not None}}
    return TrainConfig(**values)


def _model_config(conf: dict) -> ModelConfig:
    section = dict(conf.get("model", {}))
    if section.pop("reduced", False):
        return ModelConfig.reduced(**{k: (tuple(v) if k == "cnn_stage_channels" else v) for k, v in section.items()})
    return ModelConfig.from_dict(section)


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_extract(a) -> int:
    w, h = parse_size(a.size)
    samples = extract_samples(a.yuv, w, h, a.qp)
    write_dataset(a.out, samples)
    log.info("wrote %d records to %s", len(samples), a.out)
    return 0


def cmd_label(a) -> int:
    cfg = LabelConfig(lam=a.lam, split_bits=a.split_bits, header_bits=a.header_bits, qp_scaled=not a.no_qp_scaling)
    samples = label_samples(read_dataset(a.dataset), DEFAULT_RULES, cfg, a.threads)
    write_dataset(a.out, samples)
    log.info("labelled %d records into %s", len(samples), a.out)
    return 0


def cmd_balance(a) -> int:
    samples = read_dataset(a.dataset)
    out = balance_dataset(samples, a.target, a.seed)
    write_dataset(a.out, out)
    log.info("deep fraction %.3f -> %.3f (%d records)", deep_fraction(samples), deep_fraction(out), len(out))
    return 0


def cmd_train(a) -> int:
    conf = _load_config(a.config)
    model_cfg = _model_config(conf)
    tcfg = _train_config(conf.get("train", {}), stage=a.stage, seed=a.seed, steps=a.steps, lr=a.lr)
    if a.init:
        w = load_weights(a.init)
    else:
        w = init_weights(model_cfg, seed=tcfg.seed)
    result = train(read_dataset(a.dataset), w, tcfg)
    save_weights(result.weights, a.weights)
    last = result.losses[-1] if result.losses else float("nan")
    log.info("stage %s: %d steps, final loss %.6f -> %s", tcfg.stage, result.steps, last, a.weights)
    return 0


def cmd_infer(a) -> int:
    preds = infer(read_dataset(a.dataset), load_weights(a.weights), DEFAULT_RULES, a.memory, a.threads)
    _emit({"count": len(preds), "predictions": predictions_json(preds)}, a.out)
    return 0


def cmd_eval(a) -> int:
    report = eval_model(read_dataset(a.dataset), load_weights(a.weights), DEFAULT_RULES, a.memory, a.threshold, a.threads)
    if not a.per_sample:
        report.pop("per_sample")
    _emit(report, a.out)
    return 0


def cmd_ts(a) -> int:
    ts = time_saving(TimingRecord(a.t_hpm, a.t_hpm_prime, a.t_nn))
    _emit({"time_saving": ts}, None)
    return 0


def cmd_bdrate(a) -> int:
    _emit({"bd_rate_percent": bd_rate(read_curve(a.a), read_curve(a.b))}, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lculab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("extract", help="YUV 4:2:0 files -> unlabelled dataset")
    s.add_argument("--yuv", nargs="+", required=True)
    s.add_argument("--size", required=True, help="WxH")
    s.add_argument("--qp", nargs="+", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_extract)

    s = sub.add_parser("label", help="attach RD-proxy oracle labels")
    s.add_argument("--dataset", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=10.0)
    s.add_argument("--split-bits", type=float, default=1.0)
    s.add_argument("--header-bits", type=float, default=1.0)
    s.add_argument("--no-qp-scaling", action="store_true", help="use --lambda as is for every QP")
    s.add_argument("--threads", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_label)

    s = sub.add_parser("balance", help="oversample deep LCUs")
    s.add_argument("--dataset", required=True)
    s.add_argument("--target", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_balance)

    s = sub.add_parser("train", help="SGD on a labelled dataset")
    s.add_argument("--stage", choices=["encoder", "decoder", "joint", "encoder_only", "decoder_only"])
    s.add_argument("--config", help="JSON or TOML with [model] and [train] tables")
    s.add_argument("--dataset", required=True)
    s.add_argument("--weights", required=True, help="output weights file")
    s.add_argument("--init", help="start from these weights instead of a fresh init")
    s.add_argument("--seed", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--lr", type=float)
    s.set_defaults(fn=cmd_train)

    for name, fn, helptext in (("infer", cmd_infer, "decode every record"), ("eval", cmd_eval, "metrics report")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--weights", required=True)
        s.add_argument("--dataset", required=True)
        s.add_argument("--memory", choices=["encoder", "labels"], default="encoder")
        s.add_argument("--threads", type=int)
        s.add_argument("--out")
        if name == "eval":
            s.add_argument("--threshold", type=float, default=0.5)
            s.add_argument("--per-sample", action="store_true")
        s.set_defaults(fn=fn)

    s = sub.add_parser("ts", help="encoding time saving")
    s.add_argument("--t-hpm", type=float, required=True)
    s.add_argument("--t-hpm-prime", type=float, required=True)
    s.add_argument("--t-nn", type=float, required=True)
    s.set_defaults(fn=cmd_ts)

    s = sub.add_parser("bdrate", help="BD-rate of curve b against curve a")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.set_defaults(fn=cmd_bdrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except (LcuLabError, ValueError, OSError) as exc:
        print(f"lculab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
