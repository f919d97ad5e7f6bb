import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from syntf.decode import build_transitions, viterbi
from syntf.metrics import Chunk, evaluate, extract_chunks, intent_accuracy, intent_correct, slot_f1

from oracles import bio_labels, conll_chunks, random_tags


def test_extract_chunks_examples():
    assert extract_chunks(["O", "B-loc", "I-loc", "O"]) == {Chunk("loc", 1, 2)}
    assert extract_chunks(["B-a", "B-a"]) == {Chunk("a", 0, 0), Chunk("a", 1, 1)}
    assert extract_chunks(["I-a"]) == {Chunk("a", 0, 0)}
    assert extract_chunks(["B-a", "I-b"]) == {Chunk("a", 0, 0), Chunk("b", 1, 1)}


def test_tolerant_mode_matches_conlleval():
    for tags in (["I-a"], ["O", "I-a", "I-a"], ["B-a", "I-b", "I-b"], ["I-a", "B-a"]):
        assert extract_chunks(tags) == {Chunk(*c) for c in conll_chunks(tags)}


def test_slot_f1_examples():
    g = [["B-a", "O", "B-b"]]
    assert slot_f1(g, g) == (1.0, 1.0, 1.0)
    assert slot_f1([["B-a", "O", "B-c"]], g) == (0.5, 0.5, 0.5)
    assert slot_f1([["B-a", "I-a"]], [["B-a", "O"]])[2] == 0.0
    with pytest.raises(ValueError):
        slot_f1([["O"]], [])


def test_f1_zero_when_nothing_predicted():
    assert slot_f1([["O"]], [["B-a"]]) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("gold,pred,s,m", [
    ("a#b", "a", True, False),
    ("a", "a", True, True),
    ("a#b", "a#b", True, True),
    ("a", "b", False, False),
])
def test_intent_protocols(gold, pred, s, m):
    assert intent_correct(pred, gold, "ID_S") is s
    assert intent_correct(pred, gold, "ID_M") is m


def test_protocols_collapse_without_composites():
    golds, preds = ["a", "b", "c"], ["a", "c", "c"]
    assert intent_accuracy(preds, golds, "ID_S") == intent_accuracy(preds, golds, "ID_M") == 2 / 3


def test_eval_report_counts():
    r = evaluate([["B-a", "O"]], [["B-a", "B-b"]], ["x"], ["x#y"])
    assert (r.tp, r.fp, r.fn) == (1, 0, 1)
    assert r.id_s == 1.0 and r.id_m == 0.0
    assert r.slot_f1 == pytest.approx(2 * 1 * 0.5 / 1.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_f1_order_invariant_and_reflexive(seed):
    rng = np.random.default_rng(seed)
    labels = bio_labels(3)
    golds = [random_tags(rng, labels, int(rng.integers(1, 7))) for _ in range(5)]
    preds = [random_tags(rng, labels, len(g)) for g in golds]
    perm = rng.permutation(5)
    assert slot_f1(preds, golds) == slot_f1([preds[i] for i in perm], [golds[i] for i in perm])
    if any(extract_chunks(g) for g in golds):
        assert slot_f1(golds, golds)[2] == 1.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_viterbi_output_chunks_need_no_repair(n_types, T, seed):
    labels = bio_labels(n_types)
    tags = viterbi(np.random.default_rng(seed).normal(size=(T, len(labels))), build_transitions(labels)).tags
    # In a valid sequence every chunk starts with B-.
    assert all(tags[c.start].startswith("B-") for c in extract_chunks(tags))
