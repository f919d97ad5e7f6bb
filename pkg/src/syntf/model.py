"""Full joint model: frozen word/char features -> encoder -> task heads."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import numerics as nx
from .corpus import PAD_ID, Batch, LabelSpaces, Vocab
from .decode import build_transitions, viterbi
from .encoder import AttentionTrace, Encoder, EncoderConfig, dependency_loss, sinusoidal
from .heads import IntentHead, LossWeights, MLPTagger, TaskMode, intent_loss, tagging_loss, total_loss
from .numerics import Linear, Module, Parameter, Tensor


@dataclass
class ModelConfig:
    x: int = 1
    y: int = 0
    z: int = 0
    heads: int = 4
    d_model: int = 768
    d_ff: int = 3072
    d_biaffine: int = 200
    dropout: float = 0.1
    activation: str = "relu"
    syntactic_head: int = 0
    scoring: str = "biaffine"
    positional: bool = True
    word_dim: int = 300
    char_dim: int = 30
    char_window: int = 3
    mlp_hidden: int = 0  # 0 -> d_model
    mlp_layers: int = 1
    dtype: str = "float32"

    def encoder_config(self, syntactic: bool = True) -> EncoderConfig:
        keys = {f.name for f in fields(EncoderConfig)}
        return EncoderConfig(syntactic=syntactic, **{k: v for k, v in asdict(self).items() if k in keys})


@dataclass
class ModelOutput:
    intent_logits: Tensor
    slot_logits: Tensor
    pos_logits: Tensor | None
    W_s: Tensor | None
    trace: AttentionTrace
    final: Tensor


class CharEncoder(Module):
    """Frozen random character embeddings, one trainable convolution of
    width ``window`` and max-pooling over the characters of each token."""

    def __init__(self, n_chars: int, dim: int, window: int, rng, dtype):
        table = rng.uniform(-0.1, 0.1, size=(n_chars, dim)).astype(dtype)
        table[PAD_ID] = 0
        self.table = Parameter(table, trainable=False)
        self.conv = Linear(window * dim, dim, rng, dtype)
        self.window = window

    def __call__(self, char_ids: np.ndarray) -> Tensor:
        B, T, C = char_ids.shape
        pad = self.window // 2
        padded = np.pad(char_ids, ((0, 0), (0, 0), (pad, self.window - 1 - pad)), constant_values=PAD_ID)
        win = np.arange(C)[:, None] + np.arange(self.window)[None, :]
        emb = nx.embedding(self.table, padded[:, :, win])                 # B,T,C,w,d
        feats = self.conv(emb.reshape(B, T, C, self.window * self.table.shape[1]))
        return nx.masked_max(feats, (char_ids != PAD_ID)[..., None], axis=2)


class JointModel(Module):
    def __init__(self, cfg: ModelConfig, vocab: Vocab, spaces: LabelSpaces, word_vectors: np.ndarray,
                 seed: int = 0, syntactic: bool = True, use_pos: bool = True):
        dtype = np.dtype(cfg.dtype)
        rng = np.random.default_rng(seed)
        if word_vectors.shape != (len(vocab), cfg.word_dim):
            raise ValueError(f"word vectors {word_vectors.shape} do not match vocab/word_dim "
                             f"({len(vocab)}, {cfg.word_dim})")
        self.cfg = cfg
        self.enc_cfg = cfg.encoder_config(syntactic)
        self.words = Parameter(word_vectors.astype(dtype), trainable=False)
        self.chars = CharEncoder(len(vocab.char_itos), cfg.char_dim, cfg.char_window, rng, dtype)
        self.proj = Linear(cfg.word_dim + cfg.char_dim, cfg.d_model, rng, dtype)
        self.encoder = Encoder(self.enc_cfg, rng, dtype)
        self.intent = IntentHead(cfg.d_model, spaces.N, rng, dtype)
        mlp = dict(hidden=cfg.mlp_hidden or None, layers=cfg.mlp_layers, activation=cfg.activation)
        self.slot = MLPTagger(cfg.d_model, spaces.S, rng, dtype, **mlp)
        self.pos = MLPTagger(cfg.d_model, spaces.O, rng, dtype, **mlp) if use_pos and spaces.O else None
        self.transitions = build_transitions(spaces.slots.itos)
        self.spaces = spaces
        self.vocab = vocab

    def embed(self, batch: Batch, rng=None, training: bool = False) -> Tensor:
        w = nx.embedding(self.words, batch.token_ids)
        c = self.chars(batch.char_ids)
        E = self.proj(nx.concat([w, c], axis=-1))
        if self.cfg.positional:
            E = E + sinusoidal(E.shape[1], self.cfg.d_model).astype(E.dtype)
        return nx.dropout(E, self.cfg.dropout, rng, training)

    def __call__(self, batch: Batch, rng=None, training: bool = False) -> ModelOutput:
        p = self.cfg.dropout
        enc = self.encoder(self.embed(batch, rng, training), batch.mask, rng, training)
        pos_logits = None if self.pos is None else self.pos(enc.pos_tap, rng, p, training)
        return ModelOutput(self.intent(enc.final), self.slot(enc.final, rng, p, training),
                           pos_logits, enc.W_s, enc.trace, enc.final)

    def losses(self, batch: Batch, out: ModelOutput, prior: np.ndarray | None, mode: TaskMode,
               weights: LossWeights, batch_reduction: str = "mean") -> tuple[Tensor, dict[str, Tensor]]:
        parts = {}
        if mode.slots:
            parts["slot"] = tagging_loss(out.slot_logits, batch.slot_ids, batch_reduction)
        if mode.intents:
            parts["intent"] = intent_loss(out.intent_logits, batch.intent_ids)
        if weights.c_dep > 0:
            if prior is None or out.W_s is None:
                raise ValueError("dependency loss needs trees and a syntactic layer")
            parts["dep"] = dependency_loss(out.W_s, prior, batch.token_mask)
        if weights.c_pos > 0:
            if out.pos_logits is None or batch.pos_ids is None:
                raise ValueError("POS loss needs POS labels and a POS head")
            parts["pos"] = tagging_loss(out.pos_logits, batch.pos_ids, batch_reduction)
        return total_loss(parts, weights, mode), parts

    def predict(self, batch: Batch, out: ModelOutput | None = None) -> tuple[list[str], list[list[str]]]:
        """Argmax intents and Viterbi-decoded slot tags."""
        if out is None:
            out = self(batch)
        intents = [self.spaces.intents.itos[i] for i in out.intent_logits.data.argmax(-1)]
        logp = nx.log_softmax(Tensor(out.slot_logits.data.astype(np.float64))).data
        tags = [viterbi(logp[b, 1:n + 1], self.transitions).tags for b, n in enumerate(batch.lengths)]
        return intents, tags
