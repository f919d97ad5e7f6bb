"""Dataset ingestion, vocabularies, label spaces and padded batches.

A split directory holds line-aligned files::

    seq.in   space-separated tokens
    seq.out  space-separated BIO slot tags
    label    one intent per line (composite intents joined with '#')
    pos      optional, POS tag per token
    heads    optional, 1-indexed head per token, 0 = artificial root
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

PAD, UNK, SOS = "<pad>", "<unk>", "<sos>"
RESERVED = (PAD, UNK, SOS)
PAD_ID, UNK_ID, SOS_ID = 0, 1, 2
IGNORE = -1

SPLITS = ("train", "valid", "test")
_TAG_RE = re.compile(r"^(O|[BI]-\S+)$")


class DataError(ValueError):
    """Malformed or inconsistent dataset files."""


@dataclass
class Utterance:
    tokens: list[str]
    slots: list[str] | None = None
    intent: str | None = None
    pos: list[str] | None = None
    heads: list[int] | None = None

    def __post_init__(self):
        T = len(self.tokens)
        if T == 0:
            raise DataError("utterance has no tokens")
        for name in ("slots", "pos", "heads"):
            seq = getattr(self, name)
            if seq is not None and len(seq) != T:
                raise DataError(f"{name} has {len(seq)} entries for {T} tokens")
        if self.slots is not None:
            for tag in self.slots:
                if not _TAG_RE.match(tag):
                    raise DataError(f"malformed slot tag {tag!r}")
        if self.heads is not None:
            check_tree(self.heads)

    def __len__(self):
        return len(self.tokens)


def check_tree(heads: Sequence[int]) -> None:
    """Raise DataError unless ``heads`` encodes a single-rooted tree."""
    T = len(heads)
    for h in heads:
        if not 0 <= h <= T:
            raise DataError(f"head index {h} outside [0, {T}]")
    roots = [i for i, h in enumerate(heads, 1) if h == 0]
    if len(roots) != 1:
        raise DataError(f"expected exactly one root, found {len(roots)}")
    for i in range(1, T + 1):
        j, steps = i, 0
        while j != 0:
            j = heads[j - 1]
            steps += 1
            if steps > T:
                raise DataError(f"cycle in dependency heads reachable from token {i}")


def _read_lines(path: Path) -> list[str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def read_tokens(path: str | Path) -> list[list[str]]:
    """Read a ``seq.in``-format file."""
    return [line.split() for line in _read_lines(Path(path))]


def load_split(directory: str | Path, split: str | None = None, *, sidecars: bool = True,
               labels: bool = True) -> list[Utterance]:
    """Load one split. ``split`` names a subdirectory of ``directory``; pass
    None when ``directory`` already is the split directory."""
    d = Path(directory)
    if split is not None:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        d = d / split
    if not (d / "seq.in").exists():
        raise DataError(f"{d / 'seq.in'} not found")
    columns = {"tokens": [line.split() for line in _read_lines(d / "seq.in")]}
    wanted = []
    if labels:
        for name in ("seq.out", "label"):
            if not (d / name).exists():
                raise DataError(f"{d / name} not found")
        wanted += [("slots", "seq.out"), ("intent", "label")]
    if sidecars:
        wanted += [(k, k) for k in ("pos", "heads") if (d / k).exists()]
    n = len(columns["tokens"])
    for key, fname in wanted:
        lines = _read_lines(d / fname)
        if len(lines) != n:
            raise DataError(f"{d / fname} has {len(lines)} lines, seq.in has {n}")
        if key == "intent":
            columns[key] = [line.strip() for line in lines]
        elif key == "heads":
            try:
                columns[key] = [[int(x) for x in line.split()] for line in lines]
            except ValueError as e:
                raise DataError(f"{d / fname}: non-integer head ({e})") from e
        else:
            columns[key] = [line.split() for line in lines]
    out = []
    for i in range(n):
        try:
            out.append(Utterance(**{k: v[i] for k, v in columns.items()}))
        except DataError as e:
            raise DataError(f"{d}, line {i + 1}: {e}") from e
    return out


def write_split(directory: str | Path, utts: Sequence[Utterance]) -> Path:
    """Write utterances in the split-file format. Sidecars are written only
    when every utterance carries them."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {"seq.in": [" ".join(u.tokens) for u in utts]}
    if all(u.slots is not None for u in utts):
        files["seq.out"] = [" ".join(u.slots) for u in utts]
    if all(u.intent is not None for u in utts):
        files["label"] = [u.intent for u in utts]
    if all(u.pos is not None for u in utts):
        files["pos"] = [" ".join(u.pos) for u in utts]
    if all(u.heads is not None for u in utts):
        files["heads"] = [" ".join(map(str, u.heads)) for u in utts]
    for name, lines in files.items():
        (d / name).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return d


# ---------------------------------------------------------------- vocabularies

@dataclass
class Vocab:
    """Word and character vocabularies. Ids 0-2 are PAD, UNK and SOS in both."""

    itos: list[str]
    char_itos: list[str]
    stoi: dict[str, int] = field(init=False, repr=False)
    char_stoi: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.itos[:3]) != RESERVED or tuple(self.char_itos[:3]) != RESERVED:
            raise ValueError("vocab must start with the reserved entries")
        self.stoi = {w: i for i, w in enumerate(self.itos)}
        self.char_stoi = {c: i for i, c in enumerate(self.char_itos)}
        if len(self.stoi) != len(self.itos) or len(self.char_stoi) != len(self.char_itos):
            raise ValueError("duplicate vocabulary entries")

    def __len__(self):
        return len(self.itos)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def encode_chars(self, token: str) -> list[int]:
        return [self.char_stoi.get(c, UNK_ID) for c in token]


def build_vocab(train: Sequence[Utterance], min_count: int = 1) -> Vocab:
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    if not train:
        raise DataError("cannot build a vocabulary from an empty training set")
    counts = Counter(t for u in train for t in u.tokens)
    words = sorted(w for w, c in counts.items() if c >= min_count and w not in RESERVED)
    chars = sorted({c for w in counts for c in w} - set(RESERVED))
    return Vocab(list(RESERVED) + words, list(RESERVED) + chars)


@dataclass
class Labels:
    itos: list[str]
    stoi: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.stoi = {x: i for i, x in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def get(self, label: str) -> int:
        return self.stoi.get(label, IGNORE)


@dataclass
class LabelSpaces:
    slots: Labels
    intents: Labels
    pos: Labels | None = None

    @property
    def S(self):
        return len(self.slots)

    @property
    def N(self):
        return len(self.intents)

    @property
    def O(self):
        return 0 if self.pos is None else len(self.pos)

    def to_dict(self) -> dict:
        return {"slots": self.slots.itos, "intents": self.intents.itos,
                "pos": None if self.pos is None else self.pos.itos}

    @classmethod
    def from_dict(cls, d: dict) -> "LabelSpaces":
        return cls(Labels(list(d["slots"])), Labels(list(d["intents"])),
                   None if d.get("pos") is None else Labels(list(d["pos"])))


def build_label_spaces(train: Sequence[Utterance]) -> LabelSpaces:
    if not train:
        raise DataError("cannot build label spaces from an empty training set")
    slots, intents, pos = {"O"}, set(), set()
    for u in train:
        if u.slots is None or u.intent is None:
            raise DataError("training utterances need slots and an intent")
        slots.update(u.slots)
        intents.add(u.intent)
        if u.pos is not None:
            pos.update(u.pos)
    for tag in sorted(slots):
        if tag.startswith("I-") and "B-" + tag[2:] not in slots:
            log.warning("slot label %s has no matching B- label", tag)
    have_pos = all(u.pos is not None for u in train)
    return LabelSpaces(Labels(["O"] + sorted(slots - {"O"})), Labels(sorted(intents)),
                       Labels(sorted(pos)) if have_pos else None)


def load_word_vectors(path: str | Path, vocab: Vocab, dim: int, seed: int = 0,
                      dtype=np.float32) -> np.ndarray:
    """Embedding matrix |V| x dim. Rows for words found in the text-format
    vector file are copied; the rest are drawn from U(-0.1, 0.1). PAD is zero.
    ``path=None`` yields a purely random table."""
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), dim))
    if path is not None:
        try:
            fh = open(path, encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot read word vectors {path}: {e}") from e
        with fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip().split(" ")
                if len(parts) <= 1:
                    continue
                if len(parts) - 1 != dim:
                    raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
                i = vocab.stoi.get(parts[0])
                if i is not None and i >= len(RESERVED):
                    table[i] = np.array(parts[1:], dtype=np.float64)
    table[PAD_ID] = 0.0
    return table.astype(dtype)


# ---------------------------------------------------------------- batches

@dataclass(frozen=True)
class Batch:
    """Padded batch. Position 0 of every row is SOS; positions 1..T are tokens.

    ``slot_ids``/``pos_ids`` are aligned with positions and hold IGNORE at SOS,
    PAD and unknown labels. ``heads`` is a list of per-utterance head lists
    (None when absent).
    """

    token_ids: np.ndarray   # (B, T+1)
    char_ids: np.ndarray    # (B, T+1, C)
    mask: np.ndarray        # (B, T+1) bool
    lengths: np.ndarray     # (B,)
    slot_ids: np.ndarray | None
    intent_ids: np.ndarray | None
    pos_ids: np.ndarray | None
    heads: tuple | None

    def __len__(self):
        return len(self.lengths)

    @property
    def token_mask(self) -> np.ndarray:
        m = self.mask.copy()
        m[:, 0] = False
        return m


def encode_batch(utts: Sequence[Utterance], vocab: Vocab, spaces: LabelSpaces | None = None,
                 min_chars: int = 1) -> Batch:
    if not utts:
        raise DataError("empty batch")
    B = len(utts)
    lengths = np.array([len(u.tokens) for u in utts])
    if (lengths == 0).any():
        raise DataError("utterance of length 0")
    Tp = int(lengths.max()) + 1
    C = max(min_chars, max(len(t) for u in utts for t in u.tokens))
    ids = np.full((B, Tp), PAD_ID, dtype=np.int64)
    chars = np.full((B, Tp, C), PAD_ID, dtype=np.int64)
    mask = np.zeros((B, Tp), dtype=bool)
    ids[:, 0] = SOS_ID
    chars[:, 0, 0] = SOS_ID
    for b, u in enumerate(utts):
        T = len(u.tokens)
        ids[b, 1:T + 1] = vocab.encode(u.tokens)
        mask[b, :T + 1] = True
        for t, tok in enumerate(u.tokens, 1):
            cs = vocab.encode_chars(tok)
            chars[b, t, :len(cs)] = cs

    slot_ids = intent_ids = pos_ids = None
    if spaces is not None:
        if all(u.slots is not None for u in utts):
            slot_ids = np.full((B, Tp), IGNORE, dtype=np.int64)
            for b, u in enumerate(utts):
                slot_ids[b, 1:len(u) + 1] = [spaces.slots.get(s) for s in u.slots]
        if all(u.intent is not None for u in utts):
            intent_ids = np.array([spaces.intents.get(u.intent) for u in utts], dtype=np.int64)
        if spaces.pos is not None and all(u.pos is not None for u in utts):
            pos_ids = np.full((B, Tp), IGNORE, dtype=np.int64)
            for b, u in enumerate(utts):
                pos_ids[b, 1:len(u) + 1] = [spaces.pos.get(p) for p in u.pos]
    heads = tuple(tuple(u.heads) for u in utts) if all(u.heads is not None for u in utts) else None
    return Batch(ids, chars, mask, lengths, slot_ids, intent_ids, pos_ids, heads)
