"""
Training on a toy corpus
========================

A two-layer model learns slots, intents, POS tags and a supervised
attention head on 32 template sentences. Runs in seconds on one core.
"""

import numpy as np

from syntf import numerics as nx
from syntf.corpus import encode_batch
from syntf.synthetic import ToySpec, generate_utterances, toy_config
from syntf.syntax_prior import batch_prior
from syntf.trainer import run_eval, train

train_utts = generate_utterances(ToySpec(count=32, seed=0))
held_out = generate_utterances(ToySpec(count=8, seed=99))
for u in train_utts[:3]:
    print(u.intent, list(zip(u.tokens, u.slots)))

cfg = toy_config()
result = train(cfg, train_utts)
for row in result.history[::50]:
    print(row["epoch"], {k: round(v, 4) for k, v in row["loss"].items()})

###############################################################################
# The final model fits the training set.

model = result.model
report, _, _ = run_eval(model, train_utts, model.vocab)
print("slot F1", report.slot_f1, "ID-M", report.id_m)

###############################################################################
# On unseen sentences the supervised head stays close to the dependency
# prior, while the other heads in the same layer do not.

batch = encode_batch(held_out, model.vocab, model.spaces)
prior = batch_prior(batch.heads, batch.mask.shape[1])
trace = model(batch).trace
layer, sup = trace.supervised
A = trace.layers[layer - 1].astype(np.float64)
for h in range(A.shape[1]):
    kl = float(nx.kl_div_rows(prior, nx.Tensor(A[:, h]), batch.token_mask).data)
    print(f"head {h}{' (supervised)' if h == sup else ''}: KL {kl:.3f}")

###############################################################################
# The supervised head of the first held-out sentence, row by row.

u = held_out[0]
n = len(u.tokens) + 1
np.set_printoptions(precision=2, suppress=True, linewidth=140)
print(["<sos>"] + u.tokens)
print(A[0, sup, :n, :n])
