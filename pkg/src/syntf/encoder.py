"""Transformer encoder stack with one syntactically supervised layer.

Layer layout, counted from the input embeddings::

    x shared layers -> [POS tap] -> y layers -> syntactic layer -> z layers

The syntactic layer is a standard post-norm encoder layer except that one of
its heads scores keys with a biaffine form ``Q U K^T`` (no scaling). That
head still mixes values, so the dependency loss on its weights shapes the
representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .numerics import Linear, LayerNorm, Module, Parameter, Tensor


@dataclass
class EncoderConfig:
    x: int = 1
    y: int = 0
    z: int = 0
    heads: int = 4
    d_model: int = 768
    d_ff: int = 3072
    d_biaffine: int = 200
    dropout: float = 0.1
    activation: str = "relu"
    syntactic: bool = True
    syntactic_head: int = 0
    scoring: str = "biaffine"  # or "scaled_dot"

    def __post_init__(self):
        if min(self.x, self.y, self.z) < 0:
            raise ValueError("layer counts must be nonnegative")
        if self.heads < 1 or self.d_model % self.heads:
            raise ValueError(f"d_model={self.d_model} not divisible by heads={self.heads}")
        if not 0 <= self.syntactic_head < self.heads:
            raise ValueError("syntactic_head out of range")
        if self.scoring not in ("biaffine", "scaled_dot"):
            raise ValueError(f"unknown scoring {self.scoring!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def L(self) -> int:
        return self.x + self.y + 1 + self.z

    @property
    def s(self) -> int:
        """1-based index of the syntactic layer."""
        return self.x + self.y + 1

    @property
    def r(self) -> int:
        """Layer whose output feeds the POS head (0 = input embeddings)."""
        return self.x

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads


@dataclass
class AttentionTrace:
    """Per-layer attention weights, each ``(B, H, T+1, T+1)``. ``supervised``
    is ``(layer, head)`` of the syntactic head (1-based layer) or None."""

    layers: list[np.ndarray] = field(default_factory=list)
    supervised: tuple[int, int] | None = None

    def stack(self) -> np.ndarray:
        """``(B, L, H, T+1, T+1)``."""
        return np.stack(self.layers, axis=1)


def sinusoidal(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    rate = np.exp(-math.log(10000.0) * (np.arange(0, d, 2) / d))
    pe = np.zeros((n, d))
    pe[:, 0::2] = np.sin(pos * rate)
    pe[:, 1::2] = np.cos(pos * rate[: d // 2])
    return pe


def _column_mask(mask: np.ndarray) -> np.ndarray:
    # (B, T) -> (B, 1, 1, T), broadcast over heads and query rows
    return mask[:, None, None, :]


def attention_head(E: Tensor, mask: np.ndarray, wq: Linear, wk: Linear, wv: Linear) -> tuple[Tensor, Tensor]:
    """Single scaled dot-product head. ``E`` is ``(B, T, d)``, ``mask``
    ``(B, T)``. Returns ``(F, A)``."""
    q, k, v = wq(E), wk(E), wv(E)
    scores = nx.scale(q @ k.transpose(0, 2, 1), 1.0 / math.sqrt(q.shape[-1]))
    A = nx.softmax(scores, mask=mask[:, None, :])
    return A @ v, A


def biaffine_scores(E: Tensor, wq: Linear, wk: Linear, U: Parameter) -> Tensor:
    q, k = wq(E), wk(E)
    return (q @ U) @ k.transpose(0, 2, 1)


def dependency_loss(W_s: Tensor, W_prior: np.ndarray, token_mask: np.ndarray) -> Tensor:
    """Mean row-wise KL(prior || W_s) over real-token rows of the batch."""
    return nx.kl_div_rows(W_prior, W_s, token_mask)


class EncoderLayer(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator, dtype, syntactic: bool = False):
        d, dk, H = cfg.d_model, cfg.d_k, cfg.heads
        self.cfg = cfg
        self.syntactic = syntactic
        n_std = H - 1 if syntactic else H
        self.wq = Linear(d, n_std * dk, rng, dtype) if n_std else None
        self.wk = Linear(d, n_std * dk, rng, dtype) if n_std else None
        self.wv = Linear(d, H * dk, rng, dtype)
        if syntactic:
            db = cfg.d_biaffine if cfg.scoring == "biaffine" else dk
            self.wq_dep = Linear(d, db, rng, dtype)
            self.wk_dep = Linear(d, db, rng, dtype)
            self.u_dep = Parameter(np.eye(db, dtype=dtype) + nx.xavier(rng, db, db, dtype) * 0.1) \
                if cfg.scoring == "biaffine" else None
        self.wf = Linear(H * dk, d, rng, dtype)
        self.norm1 = LayerNorm(d, dtype)
        self.ff1 = Linear(d, cfg.d_ff, rng, dtype)
        self.ff2 = Linear(cfg.d_ff, d, rng, dtype)
        self.norm2 = LayerNorm(d, dtype)

    def _split(self, t: Tensor, n: int) -> Tensor:
        B, T, _ = t.shape
        return t.reshape(B, T, n, self.cfg.d_k).transpose(0, 2, 1, 3)

    def __call__(self, E: Tensor, mask: np.ndarray, rng, training: bool):
        """Returns ``(output, A, W_s)``; ``A`` is ``(B, H, T, T)`` and
        ``W_s`` the supervised head's weights (None for standard layers)."""
        cfg = self.cfg
        B, T, _ = E.shape
        H, dk = cfg.heads, cfg.d_k
        cols = _column_mask(mask)
        parts = []
        if self.wq is not None:
            n_std = self.wq.weight.shape[1] // dk
            q = self._split(self.wq(E), n_std)
            k = self._split(self.wk(E), n_std)
            parts.append(nx.scale(q @ k.transpose(0, 1, 3, 2), 1.0 / math.sqrt(dk)))
        W_s = None
        if self.syntactic:
            qd, kd = self.wq_dep(E), self.wk_dep(E)
            if self.u_dep is not None:
                syn = (qd @ self.u_dep) @ kd.transpose(0, 2, 1)
            else:
                syn = nx.scale(qd @ kd.transpose(0, 2, 1), 1.0 / math.sqrt(qd.shape[-1]))
            syn = syn.reshape(B, 1, T, T)
            h = cfg.syntactic_head
            if parts:
                std = parts[0]
                pieces = ([std[:, :h]] if h else []) + [syn] + ([std[:, h:]] if h < H - 1 else [])
                scores = nx.concat(pieces, axis=1)
            else:
                scores = syn
        else:
            scores = parts[0]
        A = nx.softmax(scores, axis=-1, mask=cols)
        if self.syntactic:
            W_s = A[:, cfg.syntactic_head]
        v = self._split(self.wv(E), H)
        Ad = nx.dropout(A, cfg.dropout, rng, training)
        F = (Ad @ v).transpose(0, 2, 1, 3).reshape(B, T, H * dk)
        att = nx.dropout(self.wf(F), cfg.dropout, rng, training)
        h1 = self.norm1(E + att)
        act = nx.activation(cfg.activation)(self.ff1(h1))
        ff = self.ff2(nx.dropout(act, cfg.dropout, rng, training))
        out = self.norm2(h1 + nx.dropout(ff, cfg.dropout, rng, training))
        return out, A, W_s


@dataclass
class EncoderOutput:
    final: Tensor
    pos_tap: Tensor
    W_s: Tensor | None
    trace: AttentionTrace


class Encoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.layers = [EncoderLayer(cfg, rng, dtype, syntactic=cfg.syntactic and j == cfg.s)
                       for j in range(1, cfg.L + 1)]

    def __call__(self, E: Tensor, mask: np.ndarray, rng=None, training: bool = False) -> EncoderOutput:
        cfg = self.cfg
        trace = AttentionTrace(supervised=(cfg.s, cfg.syntactic_head) if cfg.syntactic else None)
        pos_tap = E
        W_s = None
        for j, layer in enumerate(self.layers, 1):
            E, A, ws = layer(E, mask, rng, training)
            trace.layers.append(A.data)
            if ws is not None:
                W_s = ws
            if j == cfg.r:
                pos_tap = E
        return EncoderOutput(E, pos_tap, W_s, trace)
