import filecmp

import pytest

from syntf.corpus import load_split
from syntf.synthetic import (DEFAULT_TEMPLATES, Template, ToySpec, fill, generate, generate_dataset,
                             generate_utterances, lit, realize)


def test_seed_gives_identical_files(tmp_path):
    a = generate(ToySpec(seed=7), tmp_path / "a")
    b = generate(ToySpec(seed=7), tmp_path / "b")
    for name in ("seq.in", "seq.out", "label", "pos", "heads"):
        assert filecmp.cmp(a / name, b / name, shallow=False)


def test_different_seed_differs(tmp_path):
    a = generate_utterances(ToySpec(seed=0))
    b = generate_utterances(ToySpec(seed=1))
    assert [u.tokens for u in a] != [u.tokens for u in b]


def test_generated_splits_load(tmp_path):
    root = generate_dataset(tmp_path)
    for split, n in (("train", 32), ("valid", 8), ("test", 8)):
        utts = load_split(root, split)
        assert len(utts) == n
        assert all(u.pos is not None and u.heads is not None for u in utts)


def test_qualitative_patterns_present():
    utts = generate_utterances(ToySpec(count=32))
    may = [u for u in utts if u.tokens[:1] == ["may"]]
    assert may and all(u.pos[0] == "AUX" and u.pos[u.tokens.index("may", 1)] == "PROPN" for u in may)
    assert any("to" in u.tokens and u.tokens[-1] == "flights" for u in utts)
    assert any("#" in u.intent for u in utts)


def test_multiword_fillers_are_head_final():
    import numpy as np
    t = Template((lit("to", "ADP", 2), fill("city", "to_city", 0)), "flight")
    rng = np.random.default_rng(0)
    for _ in range(30):
        u = realize(t, rng)
        if len(u.tokens) == 3:
            assert u.heads == [3, 3, 0]
            assert u.slots == ["O", "B-to_city", "I-to_city"]
            return
    pytest.fail("no multi-word city drawn")


def test_small_vocabulary():
    words = {w for u in generate_utterances(ToySpec(count=200)) for w in u.tokens}
    assert len(words) <= 50


def test_template_inconsistency():
    import numpy as np
    bad = Template((lit("a", "DET", 2), lit("b", "NOUN", 1)), "x")  # cycle, no root
    with pytest.raises(ValueError):
        realize(bad, np.random.default_rng(0))
    with pytest.raises(ValueError):
        realize(Template((lit("a", "DET", 5),), "x"), np.random.default_rng(0))
    with pytest.raises(ValueError):
        generate_utterances(ToySpec(count=0))


def test_every_default_template_is_used():
    intents = {u.intent for u in generate_utterances(ToySpec(count=len(DEFAULT_TEMPLATES)))}
    assert intents == {t.intent for t in DEFAULT_TEMPLATES}
