"""CTC loss, its brute-force oracle, and greedy decoding.

Run with: python demos/02_ctc_decoding.py
"""

import numpy as np

from sskit.corpus import encode_target
from sskit.ctc import (Alphabet, ctc_bruteforce, ctc_loss_grad, greedy_decode,
                       postprocess_capitals)
from sskit.nn_core import log_softmax

rng = np.random.default_rng(0)

# Small lattice: 6 frames over {blank, a, b}.  The forward-backward loss
# must agree with explicitly summing all 3^6 paths.
alphabet = Alphabet(("_", "a", "b"))
logits = rng.normal(size=(6, 3))
lattice = log_softmax(logits)
target = [alphabet.index("a"), alphabet.index("b"), alphabet.index("a")]

loss, grad = ctc_loss_grad(lattice, target)
oracle = ctc_bruteforce(lattice, target)
print(f"forward-backward loss {loss:.10f}")
print(f"brute-force loss      {oracle:.10f}  (diff {abs(loss - oracle):.2e})")
print(f"gradient wrt logits has shape {grad.shape}, "
      f"per-frame sums ~0: {np.abs(grad.sum(axis=1)).max():.2e}")

# Greedy decoding collapses repeats and drops blanks...
peaked = np.full((8, 3), -8.0)
for t, k in enumerate([1, 1, 0, 2, 2, 0, 1, 1]):
    peaked[t, k] = 0.0
print(f"\ngreedy decode of a peaked lattice: "
      f"{greedy_decode(log_softmax(peaked), alphabet)!r}")

# ...and word boundaries ride along as capital letters, not as a symbol.
full = Alphabet()
ids = encode_target("hi how are you", full)
raw = full.to_string(ids)
print(f"target encoding of 'hi how are you': {raw!r}")
print(f"post-processed back: {postprocess_capitals(raw)!r}")
