"""Intent, slot and POS heads and the weighted multi-task loss."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import numerics as nx
from .numerics import Linear, Module, Tensor

log = logging.getLogger(__name__)


class NumericError(FloatingPointError):
    """A loss or gradient became non-finite."""


class TaskMode(str, Enum):
    SF = "sf"
    ID = "id"
    JOINT = "joint"

    @property
    def slots(self) -> bool:
        return self in (TaskMode.SF, TaskMode.JOINT)

    @property
    def intents(self) -> bool:
        return self in (TaskMode.ID, TaskMode.JOINT)


@dataclass
class LossWeights:
    c_dep: float = 1.0
    c_pos: float = 1.0

    def __post_init__(self):
        if self.c_dep < 0 or self.c_pos < 0:
            raise ValueError("loss coefficients must be nonnegative")


class IntentHead(Module):
    """Linear classifier over the final-layer SOS embedding."""

    def __init__(self, d_model: int, n_intents: int, rng, dtype=np.float32):
        self.out = Linear(d_model, n_intents, rng, dtype)

    def __call__(self, final: Tensor) -> Tensor:
        return self.out(final[:, 0])


class MLPTagger(Module):
    """Per-position MLP: ``layers`` hidden layers of width ``hidden`` then a
    linear map to the label space. Used for both slots and POS."""

    def __init__(self, d_model: int, n_labels: int, rng, dtype=np.float32, hidden: int | None = None,
                 layers: int = 1, activation: str = "relu"):
        hidden = hidden or d_model
        dims = [d_model] + [hidden] * layers
        self.hidden = [Linear(a, b, rng, dtype) for a, b in zip(dims, dims[1:])]
        self.out = Linear(dims[-1], n_labels, rng, dtype)
        self.act = activation

    def __call__(self, E: Tensor, rng=None, dropout: float = 0.0, training: bool = False) -> Tensor:
        f = nx.activation(self.act)
        for lin in self.hidden:
            E = nx.dropout(f(lin(E)), dropout, rng, training)
        return self.out(E)


def intent_loss(logits: Tensor, gold: np.ndarray) -> Tensor:
    """Cross-entropy averaged over the batch; unknown gold intents skipped."""
    return nx.cross_entropy(logits, gold, ignore=gold < 0, reduction="mean")


def tagging_loss(logits: Tensor, gold: np.ndarray, batch_reduction: str = "mean") -> Tensor:
    """Per-utterance cross-entropy summed over tokens, then reduced over the
    batch. SOS, PAD and unknown labels carry gold < 0 and contribute 0."""
    total = nx.cross_entropy(logits, gold, ignore=gold < 0, reduction="sum")
    if batch_reduction == "sum":
        return total
    if batch_reduction == "mean":
        return nx.scale(total, 1.0 / gold.shape[0])
    raise ValueError(f"unknown batch reduction {batch_reduction!r}")


def total_loss(parts: dict[str, Tensor], weights: LossWeights, mode: TaskMode) -> Tensor:
    """``L_nlu + c_dep * L_dep + c_pos * L_pos``.

    ``parts`` may hold ``slot``, ``intent``, ``dep`` and ``pos``; auxiliary
    parts with a zero coefficient are left out of the graph.
    """
    for name, t in parts.items():
        if not np.isfinite(t.data).all():
            raise NumericError(f"{name} loss is not finite: "
                               + ", ".join(f"{k}={float(v.data):.6g}" for k, v in parts.items()))
    terms = []
    if mode.slots:
        terms.append(parts["slot"])
    if mode.intents:
        terms.append(parts["intent"])
    if weights.c_dep and "dep" in parts:
        terms.append(nx.scale(parts["dep"], weights.c_dep))
    if weights.c_pos and "pos" in parts:
        terms.append(nx.scale(parts["pos"], weights.c_pos))
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out
