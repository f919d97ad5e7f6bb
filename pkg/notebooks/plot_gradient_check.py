"""
Checking gradients by finite differences
========================================

The autodiff engine is small enough to audit by hand, and grad_check
compares it against central differences on a sample of coordinates.
"""

import numpy as np

from syntf import numerics as nx
from syntf.numerics import Parameter, grad_check

rng = np.random.default_rng(0)
W = Parameter(rng.normal(size=(4, 3)), name="W")
x = nx.Tensor(rng.normal(size=(5, 4)))
gold = np.array([0, 2, 1, 1, 0])


def loss():
    return nx.cross_entropy(nx.matmul(x, W), gold, reduction="mean")


print("max relative error:", grad_check(loss, [W], n_samples=None))

###############################################################################
# Frozen tables are skipped, so a model with pretrained embeddings only
# probes what the optimizer will actually touch.

table = Parameter(rng.normal(size=(3, 4)), trainable=False)
print(grad_check(lambda: nx.sum_(nx.embedding(table, np.array([0, 2]))), [table]))
