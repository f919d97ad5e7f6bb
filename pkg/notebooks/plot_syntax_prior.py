"""
Dependency priors for self-attention
====================================

Each token should attend to its syntactic ancestors, closer ones more
strongly. The prior row of a token is a softmax over negative tree
distance, restricted to its ancestor chain.
"""

import numpy as np

from syntf.syntax_prior import ancestors, prior_matrix

tokens = "list flights arriving in Toronto on March first".split()
heads = [2, 0, 2, 5, 3, 7, 3, 7]  # 1-based parent per token, 0 = root

# "first" hangs off "March", which hangs off "arriving", then "flights"
i = tokens.index("first") + 1
print([(tokens[a - 1], d) for a, d in ancestors(heads, i)])

###############################################################################
# Column 0 is the sentence-start position. Only the root token points there.

np.set_printoptions(precision=3, suppress=True, linewidth=120)
P = prior_matrix(heads, tau=1.0)
print(P)

###############################################################################
# A small temperature collapses every row onto the parent.

cold = prior_matrix(heads, tau=0.01)
print(cold[i].round(4))
print("parents recovered:", [int(j) for j in cold[1:].argmax(1)] == [h for h in heads])
