"""Small template corpora with known slots, intents, POS tags and trees.

A template is a sequence of items. Each item is either a literal word or a
filler drawn from a category (possibly multi-word), and names the item it
depends on (0 = artificial root). Multi-word fillers are head-final: inner
words attach to the last word of the phrase.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Utterance, check_tree, write_split

CATEGORIES = {
    "city": (["boston", "denver", "atlanta", "toronto", "new york", "kansas city", "st. louis"], "PROPN"),
    "month": (["may", "june", "march", "april"], "PROPN"),
    "day": (["first", "second", "1st", "2nd"], "NUM"),
    "weekday": (["monday", "tuesday", "sunday"], "PROPN"),
}


@dataclass(frozen=True)
class Item:
    word: str | None = None       # literal
    category: str | None = None   # filler category
    slot: str | None = None       # slot type for fillers
    pos: str = "X"
    head: int = 0                 # 1-based item index, 0 = root


def lit(word: str, pos: str, head: int) -> Item:
    return Item(word=word, pos=pos, head=head)


def fill(category: str, slot: str, head: int) -> Item:
    return Item(category=category, slot=slot, pos=CATEGORIES[category][1], head=head)


@dataclass(frozen=True)
class Template:
    items: tuple[Item, ...]
    intent: str


DEFAULT_TEMPLATES = (
    # book a flight on <month> <day>
    Template((lit("book", "VERB", 0), lit("a", "DET", 3), lit("flight", "NOUN", 1), lit("on", "ADP", 5),
              fill("month", "depart_month", 1), fill("day", "depart_day", 5)), "book_flight"),
    # may i book a flight on <month> <day>: auxiliary "may" vs. month "may"
    Template((lit("may", "AUX", 3), lit("i", "PRON", 3), lit("book", "VERB", 0), lit("a", "DET", 5),
              lit("flight", "NOUN", 3), lit("on", "ADP", 7), Item(word="may", slot="depart_month", pos="PROPN", head=3),
              fill("day", "depart_day", 7)), "book_flight"),
    # <city> to <city> <weekday> flights: preposition between nouns
    Template((fill("city", "from_city", 5), lit("to", "ADP", 3), fill("city", "to_city", 1),
              fill("weekday", "depart_weekday", 5), lit("flights", "NOUN", 0)), "flight"),
    # show flights from <city> to <city>
    Template((lit("show", "VERB", 0), lit("flights", "NOUN", 1), lit("from", "ADP", 4),
              fill("city", "from_city", 2), lit("to", "ADP", 6), fill("city", "to_city", 2)), "flight"),
    # what is the fare from <city> to <city>
    Template((lit("what", "PRON", 0), lit("is", "AUX", 1), lit("the", "DET", 4), lit("fare", "NOUN", 1),
              lit("from", "ADP", 6), fill("city", "from_city", 4), lit("to", "ADP", 8),
              fill("city", "to_city", 4)), "airfare"),
    # flights and fares from <city> to <city>: composite intent
    Template((lit("flights", "NOUN", 0), lit("and", "CCONJ", 3), lit("fares", "NOUN", 1),
              lit("from", "ADP", 5), fill("city", "from_city", 1), lit("to", "ADP", 7),
              fill("city", "to_city", 1)), "airfare#flight"),
)


@dataclass
class ToySpec:
    templates: Sequence[Template] = DEFAULT_TEMPLATES
    count: int = 32
    seed: int = 0
    categories: dict = field(default_factory=lambda: dict(CATEGORIES))


def realize(template: Template, rng: np.random.Generator, categories: dict = CATEGORIES) -> Utterance:
    """Instantiate one template with random fillers."""
    spans = []  # per item: (start, end) 1-based token positions, inclusive
    tokens, slots, pos, parent_item = [], [], [], []
    for k, item in enumerate(template.items, 1):
        if item.word is not None:
            words = [item.word]
        else:
            choices = categories[item.category][0]
            words = choices[int(rng.integers(len(choices)))].split()
        start = len(tokens) + 1
        for n, w in enumerate(words):
            tokens.append(w)
            pos.append(item.pos)
            if item.slot is None:
                slots.append("O")
            else:
                slots.append(("B-" if n == 0 else "I-") + item.slot)
            parent_item.append((k, n == len(words) - 1))
        spans.append((start, len(tokens)))
    heads = []
    for t, (k, is_head) in enumerate(parent_item, 1):
        if not is_head:
            heads.append(spans[k - 1][1])
            continue
        h = template.items[k - 1].head
        if h > len(template.items) or h == k:
            raise ValueError(f"template item {k} has invalid head {h}")
        heads.append(0 if h == 0 else spans[h - 1][1])
    check_tree(heads)
    return Utterance(tokens, slots, template.intent, pos, heads)


def generate_utterances(spec: ToySpec) -> list[Utterance]:
    if spec.count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(spec.seed)
    n = len(spec.templates)
    return [realize(spec.templates[i % n], rng, spec.categories) for i in range(spec.count)]


def generate(spec: ToySpec, directory: str | Path) -> Path:
    """Write one split directory in corpus format."""
    return write_split(directory, generate_utterances(spec))


def generate_dataset(directory: str | Path, train: int = 32, valid: int = 8, test: int = 8, seed: int = 0) -> Path:
    """``train/``, ``valid/`` and ``test/`` splits with disjoint seeds."""
    root = Path(directory)
    for k, (name, count) in enumerate((("train", train), ("valid", valid), ("test", test))):
        generate(ToySpec(count=count, seed=seed * 1000 + k), root / name)
    return root


TOY_OVERRIDES = (
    "model.d_model=32", "model.d_ff=64", "model.heads=4", "model.d_biaffine=16",
    "model.word_dim=16", "model.char_dim=8", "model.dropout=0.0",
    "train.batch_size=8", "train.epochs=300", "train.lr=0.005",
)


def toy_config(*overrides: str):
    """Desk-scale run config for the toy corpora: a 2-layer, 4-head model
    small enough to overfit 32 utterances in seconds."""
    from .config import load_config

    return load_config(None, TOY_OVERRIDES + tuple(overrides))
