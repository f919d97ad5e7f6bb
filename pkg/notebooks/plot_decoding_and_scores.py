"""
Constrained decoding and chunk scores
=====================================

Slot tags are decoded with Viterbi under BIO constraints: ``I-x`` may only
follow ``B-x`` or ``I-x``. Scores are computed on chunks, not tokens.
"""

import numpy as np

from syntf.decode import build_transitions, viterbi
from syntf.metrics import evaluate, extract_chunks

labels = ["O", "B-city", "I-city", "B-date", "I-date"]
trans = build_transitions(labels)

# The greedy choice at step 0 would be I-city, which cannot start a span.
emissions = np.log(np.array([
    [0.10, 0.35, 0.40, 0.10, 0.05],
    [0.05, 0.05, 0.80, 0.05, 0.05],
    [0.70, 0.10, 0.05, 0.10, 0.05],
]))
print("greedy :", [labels[k] for k in emissions.argmax(1)])
print("viterbi:", viterbi(emissions, trans).tags)

###############################################################################
# Chunk extraction follows the tolerant conlleval rules, so a stray ``I-``
# in a gold file still opens a chunk.

print(extract_chunks(["B-city", "I-city", "O", "I-date"]))

###############################################################################
# Intent accuracy comes in two flavours. ``ID_S`` accepts any overlap of
# ``#``-joined labels, ``ID_M`` needs the exact string.

report = evaluate(
    slot_preds=[["B-city", "I-city", "O"], ["O", "B-date"]],
    slot_golds=[["B-city", "I-city", "O"], ["O", "B-city"]],
    intent_preds=["flight", "airfare"],
    intent_golds=["airfare#flight", "airfare"],
)
print(report.to_dict())
