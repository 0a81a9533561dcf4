import numpy as np
import pytest

from sskit.corpus import NEGATIVE, POSITIVE
from sskit.sentiment import (CharLM, FusionWeights, SentimentExample, TextCNN,
                             _simplex_grid, build_word_vocab, fit_logreg,
                             fuse, labels_to_float, train_acoustic_sentiment,
                             train_char_lm, train_text_sentiment,
                             train_word_cnn_baseline, tune_fusion)

TEXTS = ["the film was great great great",
         "a truly awful awful mess",
         "great acting and a great story",
         "awful plot and awful pacing"] * 8


def examples(texts, labels):
    return [SentimentExample(id=f"u{i}", text=t, label=l)
            for i, (t, l) in enumerate(zip(texts, labels))]


def test_labels_to_float():
    exs = examples(["a", "b"], [POSITIVE, NEGATIVE])
    assert np.array_equal(labels_to_float(exs), [1.0, 0.0])


def test_charlm_vocab_and_unknowns():
    lm = CharLM("abc")
    assert lm.vocab[0] == "\x00"
    assert lm.encode_ids("abz") == [lm.index["a"], lm.index["b"], 0]
    assert lm.unknown_count == 1


def test_encode_text_empty_and_order_sensitivity():
    lm = CharLM("abc", d_hidden=8)
    assert np.array_equal(lm.encode_text(""), np.zeros(8))
    assert not np.allclose(lm.encode_text("abc"), lm.encode_text("cba"))


def test_charlm_save_load(tmp_path):
    lm = CharLM("abc", d_hidden=8, seed=3)
    path = tmp_path / "lm.sskm"
    lm.save(path)
    again = CharLM.load(path)
    assert again.vocab == lm.vocab
    assert np.allclose(again.encode_text("abcab"), lm.encode_text("abcab"))


def test_train_char_lm_learns():
    lm, ppls = train_char_lm(TEXTS, d_hidden=16, window=32, epochs=8,
                             lr=0.5, seed=0)
    assert len(ppls) == 8
    assert ppls[-1] < ppls[0]
    assert ppls[-1] < len(lm.vocab)  # better than the uniform model
    with pytest.raises(ValueError, match="smaller than"):
        train_char_lm(["tiny"], window=64)


def test_fit_logreg_separable():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2.0, 0.5, size=(20, 2)),
                   rng.normal(2.0, 0.5, size=(20, 2))])
    y = np.array([0.0] * 20 + [1.0] * 20)
    w, b = fit_logreg(X, y, l2_c=10.0)
    acc = np.mean(((X @ w + b) > 0) == (y > 0.5))
    assert acc == 1.0
    with pytest.raises(ValueError, match="single class"):
        fit_logreg(X, np.zeros(40), 1.0)


def test_train_text_sentiment_pipeline():
    labels = [POSITIVE if "great" in t else NEGATIVE for t in TEXTS]
    lm, _ = train_char_lm(TEXTS, d_hidden=16, window=32, epochs=10, seed=0)
    train = examples(TEXTS[:24], labels[:24])
    valid = examples(TEXTS[24:], labels[24:])
    head, valid_acc = train_text_sentiment(train, valid, lm)
    assert valid_acc >= 0.75
    assert head.l2_c in (0.01, 0.1, 1.0, 10.0, 100.0)


def test_train_acoustic_sentiment():
    rng = np.random.default_rng(1)
    exs = []
    for i in range(40):
        label = POSITIVE if i % 2 == 0 else NEGATIVE
        center = 1.0 if label == POSITIVE else -1.0
        exs.append(SentimentExample(
            id=f"u{i}", text="", label=label,
            acoustic_vector=rng.normal(center, 0.3, size=5)))
    head, valid_acc = train_acoustic_sentiment(exs[:30], exs[30:])
    assert valid_acc == 1.0
    assert head.standardizer is not None


def test_fusion_weight_validation():
    with pytest.raises(ValueError):
        FusionWeights((0.5, 0.6))
    with pytest.raises(ValueError):
        FusionWeights((-0.1, 1.1))
    FusionWeights((0.3, 0.7))


def test_fuse_alignment():
    pa = {"u1": 0.9, "u2": 0.1}
    pb = {"u1": 0.5, "u2": 0.5}
    fused = fuse([pa, pb], FusionWeights((0.5, 0.5)))
    assert fused["u1"] == pytest.approx(0.7)
    with pytest.raises(ValueError, match="misaligned"):
        fuse([pa, {"u1": 0.5}], FusionWeights((0.5, 0.5)))
    with pytest.raises(ValueError, match="one weight"):
        fuse([pa], FusionWeights((0.5, 0.5)))


def test_simplex_grid():
    grid = list(_simplex_grid(3, 0.25))
    assert all(abs(sum(w) - 1.0) < 1e-12 for w in grid)
    assert all(all(x >= 0 for x in w) for w in grid)
    assert (1.0, 0.0, 0.0) in grid
    assert (0.0, 0.0, 1.0) in grid


def test_tune_fusion_prefers_informative_component():
    labels = {f"u{i}": (POSITIVE if i % 2 == 0 else NEGATIVE)
              for i in range(40)}
    perfect = {u: (0.9 if l == POSITIVE else 0.1) for u, l in labels.items()}
    useless = {u: 0.5 + 0.001 * (i % 3 - 1)
               for i, u in enumerate(labels)}
    weights = tune_fusion([perfect, useless], labels)
    fused = fuse([perfect, useless], weights)
    acc = np.mean([(fused[u] > 0.5) == (labels[u] == POSITIVE) for u in fused])
    assert acc == 1.0
    with pytest.raises(ValueError, match="at least two"):
        tune_fusion([perfect], labels)


def test_textcnn_basics():
    vocab = build_word_vocab(TEXTS)
    model = TextCNN(vocab, emb_dim=8, n_filters=4, widths=(2, 3), hidden=6)
    ids = model.token_ids("the film")
    assert len(ids) == 3  # padded to the widest filter
    p = model.forward(ids)
    assert 0.0 < p < 1.0
    with pytest.raises(ValueError):
        build_word_vocab([])


def test_word_cnn_baseline_learns():
    labels = [POSITIVE if "great" in t else NEGATIVE for t in TEXTS]
    train = examples(TEXTS[:24], labels[:24])
    valid = examples(TEXTS[24:], labels[24:])
    results = train_word_cnn_baseline(train, valid, {"test": valid},
                                      epochs=5, seed=0)
    assert results["valid"] == 1.0
    assert results["test"] == 1.0
