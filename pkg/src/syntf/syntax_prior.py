"""Ancestor chains and distance-decayed prior attention over dependency trees.

Matrices are indexed over ``[SOS, token_1, ..., token_T]``. The root token has
no word ancestor, so it puts all of its prior weight on the SOS column, which
stands in for the artificial root. The SOS row itself is all zeros and is
never supervised.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import check_tree


def ancestors(heads: Sequence[int], i: int, max_depth: int | None = None) -> list[tuple[int, int]]:
    """``(ancestor, distance)`` pairs for 1-indexed token ``i``, nearest first.

    The chain stops at the root token; the artificial root is not included.
    """
    T = len(heads)
    if not 1 <= i <= T:
        raise IndexError(f"token index {i} outside [1, {T}]")
    out = []
    j, d = heads[i - 1], 1
    while j != 0 and (max_depth is None or d <= max_depth):
        out.append((j, d))
        j = heads[j - 1]
        d += 1
    return out


def prior_matrix(heads: Sequence[int], tau: float = 1.0, max_depth: int | None = None,
                 size: int | None = None) -> np.ndarray:
    """Prior attention matrix of shape ``(T+1, T+1)`` (or ``(size, size)``
    with zero padding) for one tree.

    Row ``i`` is ``softmax(-d / tau)`` over the ancestors of token ``i`` and
    zero elsewhere.
    """
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if max_depth is not None and max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    check_tree(heads)
    T = len(heads)
    n = T + 1 if size is None else size
    if n < T + 1:
        raise ValueError(f"size {n} too small for {T} tokens")
    W = np.zeros((n, n))
    for i in range(1, T + 1):
        chain = ancestors(heads, i, max_depth)
        if not chain:
            W[i, 0] = 1.0
            continue
        cols = np.array([j for j, _ in chain])
        z = -np.array([d for _, d in chain], dtype=np.float64) / tau
        z -= z.max()
        w = np.exp(z)
        W[i, cols] = w / w.sum()
    return W


def batch_prior(heads: Sequence[Sequence[int]], size: int, tau: float = 1.0,
                max_depth: int | None = None) -> np.ndarray:
    """Stack per-utterance priors into ``(B, size, size)``."""
    return np.stack([prior_matrix(h, tau, max_depth, size) for h in heads])
