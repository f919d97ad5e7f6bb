"""Chunk-level slot F1 and the two intent-accuracy protocols.

ID-S counts a prediction as correct when it shares at least one atomic label
with the gold (labels of a multi-intent utterance are joined by '#'); ID-M
requires the full composite string to match.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence


class Chunk(NamedTuple):
    type: str
    start: int
    end: int  # inclusive


def extract_chunks(tags: Sequence[str]) -> set[Chunk]:
    """Maximal ``B-x (I-x)*`` runs. An ``I-x`` that does not continue a run
    of type x opens a new chunk, as conlleval does."""
    chunks = set()
    cur_type, cur_start = None, None
    for i, tag in enumerate(list(tags) + ["O"]):
        prefix, typ = (tag, None) if tag == "O" else (tag[0], tag[2:])
        continues = prefix == "I" and typ == cur_type
        if cur_type is not None and not continues:
            chunks.add(Chunk(cur_type, cur_start, i - 1))
            cur_type = None
        if prefix in "BI" and not continues and tag != "O":
            cur_type, cur_start = typ, i
    return chunks


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def slot_counts(preds: Sequence[Sequence[str]], golds: Sequence[Sequence[str]]) -> tuple[int, int, int]:
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predicted sequences for {len(golds)} gold sequences")
    tp = fp = fn = 0
    for p, g in zip(preds, golds):
        if len(p) != len(g):
            raise ValueError("predicted and gold tag sequences differ in length")
        pc, gc = extract_chunks(p), extract_chunks(g)
        hit = len(pc & gc)
        tp += hit
        fp += len(pc) - hit
        fn += len(gc) - hit
    return tp, fp, fn


def slot_f1(preds, golds) -> tuple[float, float, float]:
    """Micro-averaged (precision, recall, F1) over exact chunk matches."""
    tp, fp, fn = slot_counts(preds, golds)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return p, r, _f1(p, r)


def intent_correct(pred: str, gold: str, protocol: str) -> bool:
    if protocol == "ID_M":
        return pred == gold
    if protocol == "ID_S":
        return bool(set(pred.split("#")) & set(gold.split("#")))
    raise ValueError(f"unknown protocol {protocol!r}")


def intent_accuracy(preds: Sequence[str], golds: Sequence[str], protocol: str = "ID_M") -> float:
    if len(preds) != len(golds):
        raise ValueError("prediction and gold counts differ")
    if not golds:
        return 0.0
    return sum(intent_correct(p, g, protocol) for p, g in zip(preds, golds)) / len(golds)


@dataclass
class EvalReport:
    slot_precision: float
    slot_recall: float
    slot_f1: float
    id_s: float
    id_m: float
    tp: int
    fp: int
    fn: int
    intent_correct_s: int
    intent_correct_m: int
    total: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(slot_preds, slot_golds, intent_preds, intent_golds) -> EvalReport:
    tp, fp, fn = slot_counts(slot_preds, slot_golds)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    cs = sum(intent_correct(a, b, "ID_S") for a, b in zip(intent_preds, intent_golds))
    cm = sum(intent_correct(a, b, "ID_M") for a, b in zip(intent_preds, intent_golds))
    n = len(intent_golds)
    return EvalReport(p, r, _f1(p, r), cs / n if n else 0.0, cm / n if n else 0.0,
                      tp, fp, fn, cs, cm, n)
