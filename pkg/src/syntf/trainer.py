"""Optimization loop, learning-rate schedule, decoupled-decay Adam and
checkpoints."""
from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import ConfigError, RunConfig, config_from_items, to_items
from .corpus import (DataError, LabelSpaces, Utterance, Vocab, build_label_spaces, build_vocab,
                     encode_batch, load_word_vectors)
from .heads import NumericError, TaskMode
from .metrics import EvalReport, evaluate
from .model import JointModel
from .numerics import Parameter
from .syntax_prior import prior_matrix

log = logging.getLogger(__name__)

CKPT_MAGIC = b"SYNTFCKP"
CKPT_VERSION = 1


# ---------------------------------------------------------------- schedule

def lr_at(step: int, total: int, warmup: int, peak: float = 5e-4) -> float:
    """Linear warmup from 0 to ``peak`` over ``warmup`` steps, then cosine
    decay to 0 at ``total``. Steps past ``total`` give 0."""
    if step < 0:
        raise ValueError("step must be nonnegative")
    if not 0 < warmup < total:
        raise ValueError(f"need 0 < warmup ({warmup}) < total ({total})")
    if step >= total:
        return 0.0
    if step <= warmup:
        return peak * step / warmup
    progress = (step - warmup) / (total - warmup)
    return peak * 0.5 * (1.0 + math.cos(math.pi * progress))


def warmup_steps(total: int, requested: int = -1, frac: float = 0.2) -> int:
    w = requested if requested >= 0 else round(frac * total)
    return min(max(w, 1), total - 1) if total > 1 else 1


# ---------------------------------------------------------------- optimizer

@dataclass
class AdamW:
    """Adam with bias correction plus weight decay applied directly to the
    weights (``theta -= lr * wd * theta``), not through the gradient."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    weight_decay: float = 0.0
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, Parameter], lr: float) -> None:
        live = {n: p for n, p in params.items() if p.trainable and p.grad is not None}
        for name, p in live.items():
            if not np.isfinite(p.grad).all():
                raise NumericError(f"non-finite gradient in {name}")
        t = self.step_count + 1
        b1, b2 = self.beta1, self.beta2
        staged = {}
        for name, p in live.items():
            g = p.grad
            m = b1 * self.m.get(name, 0.0) + (1 - b1) * g
            v = b2 * self.v.get(name, 0.0) + (1 - b2) * g * g
            with np.errstate(over="ignore", invalid="ignore"):  # caught by the guard below
                update = lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + self.eps)
                if self.weight_decay:
                    update = update + lr * self.weight_decay * p.data
                theta = (p.data - update).astype(p.dtype)
            if not np.isfinite(theta).all():
                raise NumericError(f"update made {name} non-finite")
            staged[name] = (m, v, theta)
        # commit only once every parameter is known to stay finite
        self.step_count = t
        for name, (m, v, theta) in staged.items():
            self.m[name], self.v[name] = m, v
            live[name].data = theta


def clip_grad_norm(params: dict[str, Parameter], max_norm: float) -> float:
    grads = [p.grad for p in params.values() if p.trainable and p.grad is not None]
    norm = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads))
    if max_norm > 0 and norm > max_norm:
        for g in grads:
            g *= max_norm / (norm + 1e-12)
    return norm


# ---------------------------------------------------------------- checkpoints

@dataclass
class Checkpoint:
    config: RunConfig
    vocab: Vocab
    spaces: LabelSpaces
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def save(self, path: str | Path) -> None:
        """Layout: magic, u32 version, u64 header length, JSON header,
        then raw little-endian tensors in header order."""
        tensors, blobs, offset = [], [], 0
        for name, arr in self.params.items():
            dt = "<f8" if arr.dtype == np.float64 else "<f4"
            raw = np.ascontiguousarray(arr, dtype=dt).tobytes()
            tensors.append({"name": name, "shape": list(arr.shape), "dtype": dt,
                            "offset": offset, "nbytes": len(raw)})
            blobs.append(raw)
            offset += len(raw)
        header = {
            # the run directory is where a checkpoint lives, not part of the model
            "config": {k: v for k, v in to_items(self.config) if k != "output"},
            "vocab": {"words": self.vocab.itos, "chars": self.vocab.char_itos},
            "labels": self.spaces.to_dict(),
            "meta": self.meta,
            "tensors": tensors,
        }
        hbytes = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(CKPT_MAGIC)
            fh.write(struct.pack("<IQ", CKPT_VERSION, len(hbytes)))
            fh.write(hbytes)
            for b in blobs:
                fh.write(b)

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        data = Path(path).read_bytes()
        if data[:8] != CKPT_MAGIC:
            raise DataError(f"{path} is not a checkpoint")
        version, hlen = struct.unpack_from("<IQ", data, 8)
        if version != CKPT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        start = 8 + struct.calcsize("<IQ")
        header = json.loads(data[start:start + hlen].decode("utf-8"))
        body = start + hlen
        params = {}
        for t in header["tensors"]:
            buf = data[body + t["offset"]: body + t["offset"] + t["nbytes"]]
            params[t["name"]] = np.frombuffer(buf, dtype=t["dtype"]).reshape(t["shape"]).astype(
                np.float64 if t["dtype"] == "<f8" else np.float32)
        return cls(config_from_items(header["config"]),
                   Vocab(header["vocab"]["words"], header["vocab"]["chars"]),
                   LabelSpaces.from_dict(header["labels"]), params, header["meta"])

    def build_model(self) -> JointModel:
        cfg = self.config
        wv = self.params["words"]
        model = JointModel(cfg.model, self.vocab, self.spaces, wv, cfg.seed,
                           syntactic=cfg.use_dep, use_pos="pos.out.weight" in self.params)
        own = model.parameters()
        if set(own) != set(self.params):
            raise DataError("checkpoint parameters do not match the model layout")
        for name, p in own.items():
            p.data = self.params[name].astype(p.dtype).copy()
        return model


# ---------------------------------------------------------------- training

def iter_batches(utts: Sequence[Utterance], size: int, order: np.ndarray | None = None):
    idx = np.arange(len(utts)) if order is None else order
    for i in range(0, len(idx), size):
        yield [int(j) for j in idx[i:i + size]]


def pad_priors(priors: Sequence[np.ndarray], size: int) -> np.ndarray:
    out = np.zeros((len(priors), size, size))
    for b, p in enumerate(priors):
        n = p.shape[0]
        out[b, :n, :n] = p
    return out


def run_eval(model: JointModel, utts: Sequence[Utterance], vocab: Vocab, batch_size: int = 128
             ) -> tuple[EvalReport, list[str], list[list[str]]]:
    intents, tags = [], []
    for ids in iter_batches(utts, batch_size):
        batch = encode_batch([utts[i] for i in ids], vocab, model.spaces)
        i, t = model.predict(batch)
        intents += i
        tags += t
    report = evaluate(tags, [u.slots for u in utts], intents, [u.intent for u in utts])
    return report, intents, tags


def selection_score(report: EvalReport, mode: TaskMode, rule: str = "auto") -> float:
    if rule == "auto":
        rule = {TaskMode.SF: "slot_f1", TaskMode.ID: "id_m", TaskMode.JOINT: "sum"}[mode]
    return {"slot_f1": report.slot_f1, "id_m": report.id_m, "id_s": report.id_s,
            "sum": report.slot_f1 + report.id_m}[rule]


@dataclass
class TrainResult:
    checkpoint: Checkpoint   # best validation epoch
    model: JointModel        # parameters after the last epoch
    history: list[dict]

    def best_model(self) -> JointModel:
        return self.checkpoint.build_model()


def check_sidecars(cfg: RunConfig, train: Sequence[Utterance]) -> None:
    if cfg.use_pos and not all(u.pos is not None for u in train):
        raise DataError("use_pos=true but the training split has no pos sidecar")
    if cfg.use_dep and not all(u.heads is not None for u in train):
        raise DataError("use_dep=true but the training split has no heads sidecar")


def train(cfg: RunConfig, train_utts: Sequence[Utterance], valid_utts: Sequence[Utterance] | None = None,
          out_dir: str | Path | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Train, evaluating on ``valid_utts`` after each epoch (the training set
    when None) and keeping the best-scoring parameters."""
    cfg.validate()
    check_sidecars(cfg, train_utts)
    valid_utts = list(train_utts) if valid_utts is None else list(valid_utts)
    mode, weights, tc = cfg.task, cfg.weights, cfg.train
    dtype = np.dtype(cfg.model.dtype)

    vocab = build_vocab(train_utts, cfg.data.min_count)
    spaces = build_label_spaces(train_utts)
    wv = load_word_vectors(cfg.data.word_vectors or None, vocab, cfg.model.word_dim, cfg.seed, dtype)
    model = JointModel(cfg.model, vocab, spaces, wv, cfg.seed, syntactic=cfg.use_dep, use_pos=cfg.use_pos)
    params = model.parameters()
    priors = None
    if weights.c_dep > 0:
        priors = [prior_matrix(u.heads, cfg.prior.tau, cfg.max_ancestor_depth) for u in train_utts]

    spe = math.ceil(len(train_utts) / tc.batch_size)
    total = spe * tc.epochs
    if total < 2:
        raise ConfigError(f"a run needs at least 2 optimizer steps for warmup; got {total}")
    warm = warmup_steps(total, tc.warmup_steps, tc.warmup_frac)
    opt = AdamW(tc.beta1, tc.beta2, tc.eps, tc.weight_decay)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    drop_rng = np.random.default_rng([cfg.seed, 2])

    best_score, best_params, best_meta = -math.inf, None, {}
    history = []
    out_dir = None if out_dir is None else Path(out_dir)
    ckpt_path = None if out_dir is None else out_dir / "best.ckpt"

    def snapshot(meta) -> Checkpoint:
        return Checkpoint(cfg, vocab, spaces, {n: p.data.copy() for n, p in params.items()}, meta)

    step = 0
    for epoch in range(1, tc.epochs + 1):
        order = shuffle_rng.permutation(len(train_utts)) if tc.shuffle else None
        sums: dict[str, float] = {}
        for ids in iter_batches(train_utts, tc.batch_size, order):
            batch = encode_batch([train_utts[i] for i in ids], vocab, spaces)
            prior = None if priors is None else pad_priors([priors[i] for i in ids], batch.mask.shape[1])
            for p in params.values():
                p.grad = None
            out = model(batch, drop_rng, training=True)
            try:
                loss, parts = model.losses(batch, out, prior, mode, weights, cfg.loss.batch_reduction)
                loss.backward()
                if tc.clip_norm > 0:
                    clip_grad_norm(params, tc.clip_norm)
                opt.step(params, lr_at(step, total, warm, tc.lr))
            except NumericError:
                if ckpt_path is not None and best_params is not None:
                    best_params.save(ckpt_path)
                raise
            step += 1
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + float(v.data)
            sums["total"] = sums.get("total", 0.0) + float(loss.data)
        report, _, _ = run_eval(model, valid_utts, vocab, tc.eval_batch_size)
        score = selection_score(report, mode, tc.selection)
        row = {"epoch": epoch, "step": step, "lr": lr_at(min(step, total), total, warm, tc.lr),
               "loss": {k: v / spe for k, v in sorted(sums.items())},
               "valid": report.to_dict(), "score": score}
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
        log.info("epoch %d loss %.4f score %.4f", epoch, row["loss"]["total"], score)
        if score > best_score:
            best_score = score
            best_meta = {"epoch": epoch, "score": score, "valid": report.to_dict()}
            best_params = snapshot(best_meta)
            if ckpt_path is not None:
                best_params.save(ckpt_path)

    return TrainResult(best_params, model, history)
