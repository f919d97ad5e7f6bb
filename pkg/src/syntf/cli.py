"""Command-line entry point.

    syntf train --config run.cfg [--set key=value ...]
    syntf evaluate --checkpoint best.ckpt --data DIR [--split test]
    syntf predict --checkpoint best.ckpt --input seq.in --output preds.txt
    syntf dump-attention --checkpoint best.ckpt --input seq.in [--out trace.jsonl]

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, dump_config, load_config
from .corpus import DataError, Utterance, encode_batch, load_split, read_tokens
from .heads import NumericError
from .trainer import Checkpoint, iter_batches, run_eval, train

log = logging.getLogger("syntf")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _read_inputs(path: str | Path) -> list[Utterance]:
    """A ``seq.in`` file, or a split directory whose sidecars are ignored."""
    p = Path(path)
    if p.is_dir():
        return load_split(p, sidecars=False, labels=False)
    if not p.exists():
        raise DataError(f"{p} not found")
    try:
        return [Utterance(toks) for toks in read_tokens(p)]
    except DataError as e:
        raise DataError(f"{p}: {e}") from e


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.set)
    if not cfg.data.dir:
        raise ConfigError("data.dir is not set")
    root = Path(cfg.data.dir)
    for name in ("train", "valid"):
        if not (root / name / "seq.in").exists():
            raise DataError(f"{root / name} is not a split directory")
    if cfg.data.word_vectors and not Path(cfg.data.word_vectors).exists():
        raise DataError(f"word vector file {cfg.data.word_vectors} not found")
    train_utts = load_split(root, "train")
    valid_utts = load_split(root, "valid")
    test_utts = load_split(root, "test") if (root / "test" / "seq.in").exists() else None

    out = Path(cfg.output)
    (out / "attn").mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(dump_config(cfg), encoding="utf-8")
    metrics_log = open(out / "metrics.log", "w", encoding="utf-8")
    with metrics_log:
        def on_epoch(row):
            metrics_log.write(_json_line(row))
            metrics_log.flush()

        result = train(cfg, train_utts, valid_utts, out, on_epoch)

    model = result.best_model()
    split, utts = ("test", test_utts) if test_utts is not None else ("valid", valid_utts)
    report, _, _ = run_eval(model, utts, model.vocab, cfg.train.eval_batch_size)
    doc = {"split": split, "best_epoch": result.checkpoint.meta["epoch"], **report.to_dict()}
    (out / "report.txt").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    utts = load_split(args.data, args.split)
    model = ckpt.build_model()
    report, _, _ = run_eval(model, utts, model.vocab, ckpt.config.train.eval_batch_size)
    doc = report.to_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.output:
        Path(args.output).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_predict(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    utts = _read_inputs(args.input)
    model = ckpt.build_model()
    lines = []
    for ids in iter_batches(utts, ckpt.config.train.eval_batch_size):
        batch = encode_batch([utts[i] for i in ids], model.vocab, model.spaces)
        intents, tags = model.predict(batch)
        lines += [f"{i}\t{' '.join(t)}\n" for i, t in zip(intents, tags)]
    Path(args.output).write_text("".join(lines), encoding="utf-8")
    return EXIT_OK


def attention_records(model, utts: list[Utterance], batch_size: int = 32):
    """One dict per utterance: tokens (SOS first), ``attention[layer][head]``
    as row-major nested lists, and ``supervised``, the 0-based
    ``[layer, head]`` index of the syntactic head into ``attention``."""
    index = 0
    for ids in iter_batches(utts, batch_size):
        batch = encode_batch([utts[i] for i in ids], model.vocab, model.spaces)
        trace = model(batch).trace
        stacked = trace.stack()  # B, L, H, T, T
        sup = None if trace.supervised is None else [trace.supervised[0] - 1, trace.supervised[1]]
        for b, i in enumerate(ids):
            n = int(batch.lengths[b]) + 1
            mats = stacked[b, :, :, :n, :n].astype(np.float64)
            yield {"index": index, "tokens": ["<sos>"] + utts[i].tokens,
                   "supervised": sup,
                   "attention": mats.tolist()}
            index += 1


def cmd_dump_attention(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    utts = _read_inputs(args.input)
    model = ckpt.build_model()
    out = Path(args.out) if args.out else Path(args.checkpoint).parent / "attn" / (Path(args.input).stem + ".jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for rec in attention_records(model, utts):
            fh.write(_json_line(rec))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="syntf", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and keep the best validation checkpoint")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="slot F1, ID-S and ID-M on a labelled split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset root, or a split directory with --split none")
    p.add_argument("--split", default="test", type=lambda s: None if s == "none" else s)
    p.add_argument("--output", help="also write the report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="intent and Viterbi slot tags per input line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="seq.in file or split directory")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("dump-attention", help="export per-layer, per-head attention matrices")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="seq.in file or split directory")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_attention)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
