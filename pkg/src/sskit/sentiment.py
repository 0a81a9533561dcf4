"""Sentiment models: character-level mLSTM text encoding with logistic
regression heads, an acoustic-feature head, late fusion, and a word-level
CNN baseline.

The mLSTM is trained as a next-character language model; a text is
represented by the hidden state after its last character.  Fusion is a
convex combination of classifier probabilities with weights tuned by an
exhaustive simplex grid search on validation data.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .audio_frontend import Standardizer
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import NEGATIVE, POSITIVE
from .nn_core import (MLSTM, Dense, ParameterBlock, SgdNesterov, init_weight,
                      log_softmax, logistic_regression, sigmoid)

log = logging.getLogger(__name__)

L2_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
UNK_CHAR = "\x00"


@dataclass
class SentimentExample:
    id: str
    text: str
    label: str  # NEGATIVE / POSITIVE
    text_source: str = "ground_truth"
    acoustic_vector: np.ndarray | None = None


def labels_to_float(examples) -> np.ndarray:
    return np.array([1.0 if e.label == POSITIVE else 0.0 for e in examples])


# ---------------------------------------------------------------------------
# Character language model


class CharLM:
    """mLSTM next-character model; doubles as a text encoder."""

    def __init__(self, charset: str, d_hidden: int = 64, seed: int = 0):
        # index 0 is the reserved unknown symbol
        self.vocab = UNK_CHAR + "".join(sorted(set(charset) - {UNK_CHAR}))
        self.index = {ch: i for i, ch in enumerate(self.vocab)}
        self.d_hidden = d_hidden
        rng = np.random.default_rng(seed)
        self.mlstm = MLSTM(len(self.vocab), d_hidden, rng, "charlm.mlstm")
        self.head = Dense(d_hidden, len(self.vocab), rng, "charlm.head")
        self.unknown_count = 0

    def params(self):
        return self.mlstm.params() + self.head.params()

    def encode_ids(self, text: str) -> list[int]:
        ids = []
        for ch in text:
            idx = self.index.get(ch)
            if idx is None:
                self.unknown_count += 1
                idx = 0
            ids.append(idx)
        return ids

    def one_hot(self, ids) -> np.ndarray:
        x = np.zeros((len(ids), len(self.vocab)))
        x[np.arange(len(ids)), ids] = 1.0
        return x

    def encode_text(self, text: str) -> np.ndarray:
        """Hidden state after the last character; zeros for empty text."""
        if not text:
            log.warning("encoding empty text as a zero vector")
            return np.zeros(self.d_hidden)
        ids = self.encode_ids(text)
        hs = self.mlstm.forward(self.one_hot(ids)[:, None, :])
        return hs[-1, 0].copy()

    def save(self, path) -> None:
        desc = {"type": "charlm", "vocab": self.vocab, "d_hidden": self.d_hidden}
        save_checkpoint(path, desc, {p.name: p.values for p in self.params()})

    @classmethod
    def load(cls, path) -> "CharLM":
        desc, tensors = load_checkpoint(path)
        if desc.get("type") != "charlm":
            raise ValueError(f"{path}: not a character LM checkpoint")
        lm = cls(desc["vocab"], desc["d_hidden"])
        lm.vocab = desc["vocab"]
        lm.index = {ch: i for i, ch in enumerate(lm.vocab)}
        for p in lm.params():
            p.values[...] = tensors[p.name]
        return lm


def train_char_lm(texts, d_hidden: int = 64, window: int = 64,
                  epochs: int = 10, lr: float = 0.5, batch_size: int = 32,
                  seed: int = 0, log_every: int = 1) -> tuple[CharLM, list[float]]:
    """Train a CharLM with truncated backpropagation over fixed windows.

    Returns the model and the per-epoch training perplexities.
    """
    stream = "\n".join(texts) + "\n"
    if len(stream) <= window:
        raise ValueError(f"corpus ({len(stream)} chars) smaller than the "
                         f"truncation window ({window})")
    lm = CharLM("".join(texts) + "\n", d_hidden, seed)
    ids = np.array(lm.encode_ids(stream))

    starts = np.arange(0, len(ids) - window - 1, window)
    opt = SgdNesterov(lr, momentum=0.9, clip_norm=5.0)
    rng = np.random.default_rng(seed)
    V = len(lm.vocab)
    perplexities = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(starts)
        total_nll, total_chars = 0.0, 0
        for i in range(0, len(order), batch_size):
            chunk = order[i:i + batch_size]
            xs = np.stack([ids[s:s + window] for s in chunk], axis=1)       # [T, B]
            ys = np.stack([ids[s + 1:s + window + 1] for s in chunk], axis=1)
            x = np.zeros((window, len(chunk), V))
            t_idx, b_idx = np.meshgrid(np.arange(window), np.arange(len(chunk)),
                                       indexing="ij")
            x[t_idx, b_idx, xs] = 1.0
            hs = lm.mlstm.forward(x)
            logits = lm.head.forward(hs)
            logp = log_softmax(logits)
            nll = -logp[t_idx, b_idx, ys].sum()
            dlogits = np.exp(logp)
            dlogits[t_idx, b_idx, ys] -= 1.0
            dlogits /= xs.size
            lm.mlstm.backward(lm.head.backward(dlogits))
            opt.step(lm.params())
            total_nll += nll
            total_chars += xs.size
        ppl = float(np.exp(total_nll / total_chars))
        perplexities.append(ppl)
        if log_every and epoch % log_every == 0:
            log.info("char LM epoch %d: perplexity %.3f", epoch, ppl)
    return lm, perplexities


def encode_text(lm: CharLM, text: str) -> np.ndarray:
    return lm.encode_text(text)


# ---------------------------------------------------------------------------
# Logistic-regression heads


@dataclass
class LogRegHead:
    w: np.ndarray
    b: float
    l2_c: float
    standardizer: Standardizer | None = None

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.standardizer is not None:
            X = self.standardizer.apply(X)
        return logistic_regression(X, self.w, self.b)

    def accuracy(self, X, y) -> float:
        return float(np.mean((self.predict_proba(X) > 0.5) == (np.asarray(y) > 0.5)))


def fit_logreg(X, y, l2_c: float) -> tuple[np.ndarray, float]:
    """L-BFGS on the analytic logistic-regression loss/gradient."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(set(y.tolist())) < 2:
        raise ValueError("training set contains a single class")
    d = X.shape[1]

    def objective(theta):
        _, loss, dw, db = logistic_regression(X, theta[:d], theta[d], y, l2_c)
        return loss, np.append(dw, db)

    res = minimize(objective, np.zeros(d + 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": 500})
    return res.x[:d], float(res.x[d])


def _tune_head(X_train, y_train, X_valid, y_valid,
               standardizer=None) -> LogRegHead:
    best = None
    for l2_c in L2_GRID:  # ascending: ties resolve to the smaller value
        w, b = fit_logreg(X_train, y_train, l2_c)
        head = LogRegHead(w, b, l2_c, standardizer)
        acc = float(np.mean((logistic_regression(X_valid, w, b) > 0.5)
                            == (y_valid > 0.5)))
        if best is None or acc > best[0]:
            best = (acc, head)
    return best[1]


def train_text_sentiment(train, valid, lm: CharLM) -> tuple[LogRegHead, float]:
    """Tune the text head over the regularization grid by validation accuracy."""
    X_train = np.stack([lm.encode_text(e.text) for e in train])
    X_valid = np.stack([lm.encode_text(e.text) for e in valid])
    y_train, y_valid = labels_to_float(train), labels_to_float(valid)
    head = _tune_head(X_train, y_train, X_valid, y_valid)
    return head, head.accuracy(X_valid, y_valid)


def train_acoustic_sentiment(train, valid) -> tuple[LogRegHead, float]:
    """Acoustic head: standardized functional vectors -> logistic regression."""
    X_train = np.stack([e.acoustic_vector for e in train])
    X_valid = np.stack([e.acoustic_vector for e in valid])
    std = Standardizer.fit([X_train])
    Xt, Xv = std.apply(X_train), std.apply(X_valid)
    y_train, y_valid = labels_to_float(train), labels_to_float(valid)
    head = _tune_head(Xt, y_train, Xv, y_valid, standardizer=std)
    return head, head.accuracy(X_valid, y_valid)


# ---------------------------------------------------------------------------
# Late fusion


@dataclass
class FusionWeights:
    weights: tuple[float, ...]

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise ValueError("fusion weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("fusion weights must sum to 1")

    def to_json(self) -> str:
        import json
        return json.dumps({"weights": list(self.weights)})


def fuse(predictions: list[dict], weights: FusionWeights) -> dict:
    """Convex combination of per-utterance probability maps (id -> p)."""
    if len(predictions) != len(weights.weights):
        raise ValueError("one weight per classifier required")
    ids = list(predictions[0])
    for pred in predictions[1:]:
        if set(pred) != set(ids):
            raise ValueError("prediction id sets are misaligned")
    return {i: sum(w * pred[i] for w, pred in zip(weights.weights, predictions))
            for i in ids}


def _simplex_grid(k: int, step: float):
    n = int(round(1.0 / step))
    for combo in itertools.product(range(n + 1), repeat=k - 1):
        if sum(combo) <= n:
            rest = n - sum(combo)
            yield tuple(c / n for c in combo) + (rest / n,)


def tune_fusion(valid_predictions: list[dict], valid_labels: dict,
                grid_step: float = 0.05) -> FusionWeights:
    """Exhaustive simplex grid search (vertices included) on validation accuracy.

    Ties are broken toward the weight vector closest to uniform.
    """
    if len(valid_predictions) < 2:
        raise ValueError("fusion needs at least two classifiers")
    k = len(valid_predictions)
    uniform = np.full(k, 1.0 / k)
    best = None
    for weights in _simplex_grid(k, grid_step):
        fused = fuse(valid_predictions, FusionWeights(weights))
        acc = np.mean([(fused[i] > 0.5) == (valid_labels[i] == POSITIVE)
                       for i in fused])
        dist = float(np.sum((np.array(weights) - uniform) ** 2))
        key = (-acc, dist, weights)
        if best is None or key < best[0]:
            best = (key, weights)
    return FusionWeights(best[1])


# ---------------------------------------------------------------------------
# Word-level CNN baseline

UNK_WORD = "<unk>"
PAD_WORD = "<pad>"


class TextCNN:
    """Word-embedding CNN: 100 filters each of widths 2-5, max-pooled,
    a 400-unit hidden layer and a sigmoid output."""

    def __init__(self, vocab: dict[str, int], emb_dim: int = 50,
                 n_filters: int = 100, widths=(2, 3, 4, 5),
                 hidden: int = 400, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.vocab = vocab
        self.widths = tuple(widths)
        self.n_filters = n_filters
        self.emb = ParameterBlock("cnn.emb", init_weight(rng, (len(vocab), emb_dim)))
        self.convs = {k: Dense(k * emb_dim, n_filters, rng, f"cnn.conv{k}")
                      for k in self.widths}
        self.fc = Dense(n_filters * len(self.widths), hidden, rng, "cnn.fc")
        self.out = Dense(hidden, 1, rng, "cnn.out")
        self.emb_dim = emb_dim

    def params(self):
        ps = [self.emb]
        for k in self.widths:
            ps += self.convs[k].params()
        return ps + self.fc.params() + self.out.params()

    def token_ids(self, text: str) -> list[int]:
        ids = [self.vocab.get(w, self.vocab[UNK_WORD]) for w in text.split()]
        min_len = max(self.widths)
        while len(ids) < min_len:
            ids.append(self.vocab[PAD_WORD])
        return ids

    def forward(self, ids) -> float:
        """Probability of the positive class for one token-id sequence."""
        E = self.emb.values[ids]                       # [n, d]
        n = len(ids)
        self._cache = {"ids": ids, "E": E, "windows": {}, "pooled": []}
        pooled = []
        for k in self.widths:
            win = np.stack([E[i:i + k].reshape(-1) for i in range(n - k + 1)])
            act = np.tanh(self.convs[k].forward(win))  # [n-k+1, F]
            arg = np.argmax(act, axis=0)
            self._cache["windows"][k] = (win, act, arg)
            pooled.append(act[arg, np.arange(self.n_filters)])
        feat = np.concatenate(pooled)                  # [400]
        hid = np.tanh(self.fc.forward(feat[None, :]))
        z = self.out.forward(hid)[0, 0]
        p = float(sigmoid(z))
        self._cache.update(feat=feat, hid=hid, p=p)
        return p

    def backward(self, dp: float) -> None:
        """Backprop d(loss)/d(sigmoid logit) through the cached forward."""
        c = self._cache
        dhid = self.out.backward(np.array([[dp]]))
        dfeat = self.fc.backward(dhid * (1 - c["hid"] ** 2))[0]
        dE = np.zeros_like(c["E"])
        for j, k in enumerate(self.widths):
            win, act, arg = c["windows"][k]
            dact = np.zeros_like(act)
            dpool = dfeat[j * self.n_filters:(j + 1) * self.n_filters]
            dact[arg, np.arange(self.n_filters)] = dpool
            dwin = self.convs[k].backward(dact * (1 - act ** 2))
            for i in range(win.shape[0]):
                dE[i:i + k] += dwin[i].reshape(k, self.emb_dim)
        np.add.at(self.emb.grads, c["ids"], dE)

    def loss_and_grad(self, ids, y: float) -> float:
        """BCE loss; accumulates gradients into the parameter blocks."""
        p = self.forward(ids)
        eps = 1e-12
        loss = -(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
        self.backward(p - y)  # d(BCE)/d(logit)
        return float(loss)


def build_word_vocab(texts) -> dict[str, int]:
    vocab = {UNK_WORD: 0, PAD_WORD: 1}
    for text in texts:
        for w in text.split():
            vocab.setdefault(w, len(vocab))
    if len(vocab) <= 2:
        raise ValueError("empty word vocabulary")
    return vocab


def train_word_cnn_baseline(train, valid, test_variants: dict,
                            epochs: int = 20, lr: float = 0.05,
                            seed: int = 0) -> dict[str, float]:
    """Train the word CNN on ground-truth text, evaluate per test variant.

    `test_variants` maps a text-source name to a list of SentimentExample;
    returns {source: accuracy} plus "valid".
    """
    vocab = build_word_vocab([e.text for e in train])
    model = TextCNN(vocab, seed=seed)
    opt = SgdNesterov(lr, momentum=0.9, clip_norm=5.0)
    rng = np.random.default_rng(seed)
    y_train = labels_to_float(train)
    order = np.arange(len(train))
    for _ in range(epochs):
        rng.shuffle(order)
        for i in order:
            model.loss_and_grad(model.token_ids(train[i].text), y_train[i])
            opt.step(model.params())

    def accuracy(examples):
        y = labels_to_float(examples)
        preds = np.array([model.forward(model.token_ids(e.text)) > 0.5
                          for e in examples])
        return float(np.mean(preds == (y > 0.5)))

    results = {"valid": accuracy(valid)}
    for name, examples in test_variants.items():
        results[name] = accuracy(examples)
    return results
