import math

import numpy as np
import pytest

from syntf.corpus import DataError, Utterance
from syntf.heads import NumericError
from syntf.numerics import Parameter
from syntf.synthetic import ToySpec, generate_utterances, toy_config
from syntf.trainer import AdamW, Checkpoint, clip_grad_norm, lr_at, run_eval, train, warmup_steps


# ------------------------------------------------------------------ schedule

def test_lr_endpoints():
    assert lr_at(0, 100, 20) == 0.0
    assert lr_at(20, 100, 20) == 5e-4
    assert abs(lr_at(100, 100, 20)) < 1e-12
    assert lr_at(150, 100, 20) == 0.0


def test_lr_warmup_is_linear():
    assert lr_at(5, 100, 20) == pytest.approx(5e-4 / 4)
    assert lr_at(10, 100, 20, peak=1.0) == pytest.approx(0.5)


def test_lr_cosine_midpoint():
    assert lr_at(60, 100, 20) == pytest.approx(2.5e-4, abs=1e-15)


def test_lr_continuous_and_nonincreasing():
    assert abs(lr_at(20, 1000, 20) - lr_at(21, 1000, 20)) < 1e-7
    after = [lr_at(s, 1000, 200) for s in range(200, 1001)]
    assert all(b <= a for a, b in zip(after, after[1:]))


def test_lr_bad_arguments():
    with pytest.raises(ValueError):
        lr_at(-1, 10, 2)
    with pytest.raises(ValueError):
        lr_at(0, 10, 10)


def test_warmup_steps_default_and_clamp():
    assert warmup_steps(100) == 20
    assert warmup_steps(100, 7) == 7
    assert warmup_steps(3, frac=0.0) == 1
    assert warmup_steps(10, 50) == 9


# ------------------------------------------------------------------ optimizer

def hand_adam(g, lr, steps, b1=0.9, b2=0.999, eps=1e-7):
    theta, m, v = 1.0, 0.0, 0.0
    for t in range(1, steps + 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return theta


def test_adam_three_steps_match_hand_trajectory():
    p = Parameter(np.array([1.0]))
    opt = AdamW()
    for step in range(1, 4):
        p.grad = np.array([0.3])
        opt.step({"w": p}, 0.01)
        assert p.data[0] == pytest.approx(hand_adam(0.3, 0.01, step), abs=1e-15)
    # with constant g the bias-corrected ratio is ~1, so each step moves ~lr
    assert p.data[0] == pytest.approx(1 - 0.03, abs=1e-6)


def test_frozen_parameter_untouched():
    table = Parameter(np.random.default_rng(0).normal(size=(5, 3)), trainable=False)
    w = Parameter(np.ones(3))
    before = table.data.copy()
    opt = AdamW(weight_decay=0.1)
    for _ in range(100):
        table.grad = np.ones_like(table.data)
        w.grad = np.ones(3)
        opt.step({"table": table, "w": w}, 1e-3)
    assert table.data.tobytes() == before.tobytes()
    assert "table" not in opt.m


def test_decoupled_decay_with_zero_gradient():
    p = Parameter(np.array([2.0, -1.0]))
    opt = AdamW(weight_decay=0.1)
    for _ in range(5):
        p.grad = np.zeros(2)
        opt.step({"w": p}, 0.01)
    np.testing.assert_allclose(p.data, np.array([2.0, -1.0]) * (1 - 0.001) ** 5, rtol=1e-13)


def test_nonfinite_gradient_names_parameter():
    a, b = Parameter(np.ones(2)), Parameter(np.ones(2))
    a.grad, b.grad = np.ones(2), np.array([1.0, np.inf])
    with pytest.raises(NumericError, match="enc.b"):
        AdamW().step({"enc.a": a, "enc.b": b}, 0.1)
    assert (a.data == 1).all()  # whole step aborted


def test_clip_grad_norm():
    p = Parameter(np.zeros(2))
    p.grad = np.array([3.0, 4.0])
    assert clip_grad_norm({"p": p}, 1.0) == pytest.approx(5.0)
    assert np.linalg.norm(p.grad) == pytest.approx(1.0)


# ------------------------------------------------------------------ training

@pytest.fixture(scope="module")
def short_run():
    utts = generate_utterances(ToySpec(count=16, seed=1))
    valid = generate_utterances(ToySpec(count=6, seed=2))
    cfg = toy_config("train.epochs=4")
    return cfg, utts, valid, train(cfg, utts, valid)


def test_history_rows(short_run):
    cfg, _, _, res = short_run
    assert [r["epoch"] for r in res.history] == [1, 2, 3, 4]
    assert set(res.history[0]["loss"]) == {"slot", "intent", "dep", "pos", "total"}
    assert res.history[-1]["step"] == 4 * 2


def test_best_checkpoint_is_first_max(short_run):
    _, _, _, res = short_run
    scores = [r["score"] for r in res.history]
    assert res.checkpoint.meta["epoch"] == scores.index(max(scores)) + 1


def test_checkpoint_roundtrip_reproduces_metrics(short_run, tmp_path):
    cfg, _, valid, res = short_run
    path = tmp_path / "best.ckpt"
    res.checkpoint.save(path)
    loaded = Checkpoint.load(path)
    for name, arr in res.checkpoint.params.items():
        assert loaded.params[name].tobytes() == arr.tobytes()
    model = loaded.build_model()
    report, _, _ = run_eval(model, valid, model.vocab)
    assert report.to_dict() == res.checkpoint.meta["valid"]


def test_checkpoint_rejects_garbage(tmp_path):
    bad = tmp_path / "x.ckpt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(DataError):
        Checkpoint.load(bad)


def test_training_is_deterministic(short_run):
    cfg, utts, valid, res = short_run
    again = train(cfg, utts, valid)
    assert [r["loss"] for r in again.history] == [r["loss"] for r in res.history]
    for name, arr in res.checkpoint.params.items():
        assert again.checkpoint.params[name].tobytes() == arr.tobytes()


def test_use_pos_needs_sidecar():
    utts = [Utterance(u.tokens, u.slots, u.intent, None, u.heads)
            for u in generate_utterances(ToySpec(count=4))]
    with pytest.raises(DataError, match="pos"):
        train(toy_config("train.epochs=2"), utts)
    train(toy_config("train.epochs=2", "use_pos=false"), utts)


def test_plain_transformer_ablation_trains():
    utts = generate_utterances(ToySpec(count=4))
    res = train(toy_config("train.epochs=2", "use_dep=false", "use_pos=false"), utts)
    assert set(res.history[0]["loss"]) == {"slot", "intent", "total"}
    assert res.model.encoder.cfg.syntactic is False


def test_single_step_run_rejected():
    from syntf.config import ConfigError
    with pytest.raises(ConfigError, match="2 optimizer steps"):
        train(toy_config("train.epochs=1"), generate_utterances(ToySpec(count=4)))
