import numpy as np
import pytest

from syntf.corpus import (IGNORE, PAD_ID, SOS_ID, UNK_ID, DataError, Utterance, build_label_spaces,
                          build_vocab, encode_batch, load_split, load_word_vectors, write_split)


def write(d, **files):
    d.mkdir(parents=True, exist_ok=True)
    for name, lines in files.items():
        (d / name.replace("_", ".")).write_text("".join(x + "\n" for x in lines), encoding="utf-8")
    return d


def test_load_split_airfare_example(tmp_path):
    write(tmp_path / "train",
              seq_in=["show me fares from toronto to st. louis"],
              seq_out=["O O O O B-fromloc.city_name O B-toloc.city_name I-toloc.city_name"],
              label=["atis_airfare"])
    [u] = load_split(tmp_path, "train")
    assert u.tokens[4] == "toronto" and u.slots[4] == "B-fromloc.city_name"
    assert u.intent == "atis_airfare"
    assert u.heads is None and u.pos is None


def test_load_split_with_sidecars(tmp_path):
    d = write(tmp_path, seq_in=["a b"], seq_out=["O B-x"], label=["i"], pos=["DET NOUN"], heads=["2 0"])
    [u] = load_split(d)
    assert u.heads == [2, 0] and u.pos == ["DET", "NOUN"]


@pytest.mark.parametrize("files", [
    dict(seq_in=["a b c"], seq_out=["O O"], label=["i"]),                 # token count
    dict(seq_in=["a b", "c"], seq_out=["O O"], label=["i"]),               # line count
    dict(seq_in=["a b"], seq_out=["O O"], label=["i"], heads=["0 3"]),      # head out of range
    dict(seq_in=["a b"], seq_out=["O O"], label=["i"], heads=["0 0"]),      # two roots
    dict(seq_in=["a b c"], seq_out=["O O O"], label=["i"], heads=["2 1 0"]),  # cycle
    dict(seq_in=["a b"], seq_out=["O X-y"], label=["i"]),                   # bad tag
    dict(seq_in=["a b"], seq_out=["O O"], label=["i"], heads=["x 0"]),      # non-integer
])
def test_load_split_errors(tmp_path, files):
    with pytest.raises(DataError):
        load_split(write(tmp_path, **files))


def test_missing_label_file(tmp_path):
    with pytest.raises(DataError):
        load_split(write(tmp_path, seq_in=["a"], seq_out=["O"]))


def test_write_then_load_round_trip(tmp_path, two_utts):
    write_split(tmp_path, two_utts)
    assert load_split(tmp_path) == two_utts


def test_build_vocab_min_count():
    u = [Utterance("a b a".split())]
    v1 = build_vocab(u, 1)
    assert {"a", "b"} <= set(v1.itos) and len(v1) == 5
    v2 = build_vocab(u, 2)
    assert "a" in v2.stoi and "b" not in v2.stoi
    assert v2.encode(["b"]) == [UNK_ID]
    with pytest.raises(ValueError):
        build_vocab(u, 0)
    with pytest.raises(DataError):
        build_vocab([], 1)


def test_vocab_round_trip_up_to_unk(two_utts):
    v = build_vocab(two_utts[:1])
    toks = two_utts[1].tokens
    back = v.decode(v.encode(toks))
    assert [b if b != "<unk>" else None for b in back] == [t if t in v.stoi else None for t in toks]


def test_label_spaces():
    u = [Utterance("x y z".split(), "O B-loc I-loc".split(), "flight")]
    s = build_label_spaces(u)
    assert (s.S, s.N, s.O) == (3, 1, 0)
    assert s.slots.itos[0] == "O"
    with pytest.raises(DataError):
        build_label_spaces([])


def test_composite_intent_is_one_class(two_utts):
    s = build_label_spaces(two_utts)
    assert "airfare#flight" in s.intents.itos and s.N == 2


def test_orphan_inside_tag_warns_but_is_kept(caplog):
    s = build_label_spaces([Utterance(["x"], ["I-loc"], "i")])
    assert "I-loc" in s.slots.itos
    assert "no matching B-" in caplog.text


def test_label_spaces_deterministic(two_utts):
    a = build_label_spaces(two_utts).to_dict()
    b = build_label_spaces(list(reversed(two_utts))).to_dict()
    assert a == b


def test_word_vectors(tmp_path, two_utts):
    v = build_vocab(two_utts)
    f = tmp_path / "vec.txt"
    f.write_text("boston 0.1 0.2\nunused 1 2\n")
    m = load_word_vectors(f, v, 2, seed=3)
    np.testing.assert_array_equal(m[v.stoi["boston"]], np.float32([0.1, 0.2]))
    np.testing.assert_array_equal(m[PAD_ID], 0)
    other = m[v.stoi["denver"]]
    assert (np.abs(other) <= 0.1).all()
    np.testing.assert_array_equal(load_word_vectors(f, v, 2, seed=3), m)
    f.write_text("boston 0.1 0.2 0.3\n")
    with pytest.raises(DataError):
        load_word_vectors(f, v, 2)
    with pytest.raises(DataError):
        load_word_vectors(tmp_path / "missing.txt", v, 2)


def test_encode_batch_shapes_and_masks(two_utts):
    utts = [Utterance("a b c".split()), Utterance("a b c d e".split())]
    v = build_vocab(utts)
    b = encode_batch(utts, v)
    assert b.token_ids.shape == (2, 6)
    assert list(b.mask[0]) == [1, 1, 1, 1, 0, 0]
    assert (b.token_ids[:, 0] == SOS_ID).all()
    assert (b.mask.sum(1) == b.lengths + 1).all()
    single = encode_batch(utts[:1], v)
    assert single.mask.all() and single.mask.shape == (1, 4)
    unseen = encode_batch([Utterance(["zzz"])], v)
    assert unseen.token_ids[0, 1] == UNK_ID


def test_encode_batch_labels_ignore_sos_and_pad(two_utts):
    v, s = build_vocab(two_utts), build_label_spaces(two_utts)
    b = encode_batch(two_utts, v, s)
    assert (b.slot_ids[:, 0] == IGNORE).all()
    assert b.slot_ids[1, 4] == IGNORE and b.pos_ids[1, 4] == IGNORE
    assert b.token_ids[1, 4] == PAD_ID
    assert list(b.intent_ids) == [s.intents.stoi["flight"], s.intents.stoi["airfare#flight"]]
    assert b.heads == ((0, 1, 4, 2), (0, 3, 1))


def test_encode_batch_errors():
    with pytest.raises(DataError):
        encode_batch([], None)
    with pytest.raises(DataError):
        Utterance([])
