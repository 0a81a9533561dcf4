"""Character-mLSTM sentiment on clean vs ASR-damaged text, plus late fusion.

Takes ~20 s.  Run with: python demos/04_sentiment_and_fusion.py
"""

import random

import numpy as np

from sskit.corpus import POSITIVE
from sskit.sentiment import (SentimentExample, fuse, train_char_lm,
                             train_text_sentiment, tune_fusion)
from sskit.synth import corrupt_text, make_sentiment_corpus

rows = make_sentiment_corpus(400, seed=0)
train, valid, test = rows[:280], rows[280:340], rows[340:]


def examples(split):
    return [SentimentExample(id=f"u{i}", text=t, label=l)
            for i, (t, l) in enumerate(split)]


# The mLSTM is trained purely as a next-character language model; the
# hidden state after the last character then serves as the text encoding.
lm, ppls = train_char_lm([t for t, _ in train], d_hidden=64, window=64,
                         epochs=40, lr=0.5, seed=0)
print(f"char LM perplexity: {ppls[0]:.2f} -> {ppls[-1]:.2f}")

head, valid_acc = train_text_sentiment(examples(train), examples(valid), lm)
print(f"validation accuracy {valid_acc:.3f} (l2_c={head.l2_c})")

y = np.array([1.0 if l == POSITIVE else 0.0 for _, l in test])
X_clean = np.stack([lm.encode_text(t) for t, _ in test])
print(f"clean test accuracy: {head.accuracy(X_clean, y):.3f}")

rng = random.Random(1)
for rate in (0.1, 0.2, 0.3):
    X = np.stack([lm.encode_text(corrupt_text(t, rate, rng)) for t, _ in test])
    print(f"character corruption {rate:.1f}: accuracy {head.accuracy(X, y):.3f}")

# Late fusion: two complementary classifiers, each confident on half the
# data and slightly wrong on the other half.  Neither vertex wins; the
# simplex grid search lands on an interior mixture.
labels = {f"u{i}": l for i, (_, l) in enumerate(test)}
ysign = {u: 1.0 if l == POSITIVE else 0.0 for u, l in labels.items()}
pa, pb = {}, {}
for i, u in enumerate(ysign):
    right = 0.9 * ysign[u] + 0.1 * (1 - ysign[u])
    wrong = 0.45 * ysign[u] + 0.55 * (1 - ysign[u])
    pa[u], pb[u] = (right, wrong) if i % 2 == 0 else (wrong, right)


def accuracy(pred):
    return float(np.mean([(pred[u] > 0.5) == (ysign[u] == 1.0) for u in pred]))


weights = tune_fusion([pa, pb], labels)
fused = fuse([pa, pb], weights)
print(f"\nfusion components: {accuracy(pa):.3f} / {accuracy(pb):.3f}")
print(f"tuned weights {weights.weights} -> fused accuracy {accuracy(fused):.3f}")
