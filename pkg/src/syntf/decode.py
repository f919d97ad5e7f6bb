"""Constrained Viterbi decoding over BIO slot sequences.

Transitions are hard 0/1 constraints: ``O -> I-x`` and ``B-x/I-x -> I-y``
(x != y) are forbidden, as is starting a sequence with ``I-x``. In log space
forbidden moves score -inf and allowed ones score 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _parse(label: str) -> tuple[str, str | None]:
    if label == "O":
        return "O", None
    if len(label) > 2 and label[1] == "-" and label[0] in "BI":
        return label[0], label[2:]
    raise ValueError(f"malformed BIO label {label!r}")


@dataclass(frozen=True)
class TransitionMatrix:
    labels: tuple[str, ...]
    allowed: np.ndarray  # (S, S) 0/1, [prev, next]
    start: np.ndarray    # (S,) 0/1

    @property
    def log_allowed(self) -> np.ndarray:
        return np.where(self.allowed > 0, 0.0, -np.inf)

    @property
    def log_start(self) -> np.ndarray:
        return np.where(self.start > 0, 0.0, -np.inf)


def build_transitions(slot_labels: Sequence[str]) -> TransitionMatrix:
    parsed = [_parse(label) for label in slot_labels]
    S = len(parsed)
    allowed = np.ones((S, S), dtype=np.int8)
    start = np.ones(S, dtype=np.int8)
    for j, (pj, tj) in enumerate(parsed):
        if pj != "I":
            continue
        start[j] = 0
        for i, (pi, ti) in enumerate(parsed):
            if pi == "O" or ti != tj:
                allowed[i, j] = 0
    return TransitionMatrix(tuple(slot_labels), allowed, start)


def is_valid(tags: Sequence[str]) -> bool:
    prev = None
    for tag in tags:
        p, t = _parse(tag)
        if p == "I" and (prev is None or prev[1] != t):
            return False
        prev = (p, t)
    return True


@dataclass(frozen=True)
class DecodedSlots:
    ids: list[int]
    tags: list[str]
    score: float


def viterbi(log_probs: np.ndarray, trans: TransitionMatrix) -> DecodedSlots:
    """Highest-scoring valid label path. Ties go to the lowest label id,
    compared position by position from the left."""
    em = np.asarray(log_probs, dtype=np.float64)
    T, S = em.shape
    if T < 1:
        raise ValueError("empty emission matrix")
    if S != len(trans.labels):
        raise ValueError(f"emissions have {S} labels, transitions {len(trans.labels)}")
    if not np.isfinite(em).all():
        raise ValueError("emissions must be finite")
    la = trans.log_allowed
    # Backward pass: best[t, s] = best score of positions t..T-1 given label s at t.
    # Forward argmax with lowest-id ties then yields the lexicographically
    # smallest optimal path.
    best = np.empty((T, S))
    best[T - 1] = em[T - 1]
    for t in range(T - 2, -1, -1):
        best[t] = em[t] + (la + best[t + 1][None, :]).max(axis=1)
    path = [int(np.argmax(trans.log_start + best[0]))]
    for t in range(1, T):
        path.append(int(np.argmax(la[path[-1]] + best[t])))
    score = float(trans.log_start[path[0]] + best[0, path[0]])
    return DecodedSlots(path, [trans.labels[i] for i in path], score)
