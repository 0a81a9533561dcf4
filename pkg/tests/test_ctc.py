import numpy as np
import pytest
from hypothesis import given, strategies as st

from sskit.corpus import encode_target
from sskit.ctc import (Alphabet, TargetUnreachableError, collapse_path,
                       ctc_bruteforce, ctc_loss_grad, greedy_decode,
                       mean_frame_entropy, min_frames, postprocess_capitals)
from sskit.nn_core import log_softmax


def random_lattice(rng, T, S):
    return log_softmax(rng.normal(size=(T, S)))


def test_loss_matches_bruteforce():
    rng = np.random.default_rng(0)
    for _ in range(50):
        T, S = int(rng.integers(2, 7)), int(rng.integers(2, 5))
        lat = random_lattice(rng, T, S)
        target = [int(s) for s in rng.integers(1, S, size=rng.integers(0, 4))]
        try:
            loss, _ = ctc_loss_grad(lat, target)
        except TargetUnreachableError:
            assert min_frames(target) > T
            continue
        assert loss == pytest.approx(ctc_bruteforce(lat, target), abs=1e-10)


def test_gradient_against_finite_differences():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(5, 4))
    target = [1, 2, 1]
    _, grad = ctc_loss_grad(log_softmax(logits), target)
    eps = 1e-6
    for t in range(5):
        for k in range(4):
            orig = logits[t, k]
            logits[t, k] = orig + eps
            lp, _ = ctc_loss_grad(log_softmax(logits), target)
            logits[t, k] = orig - eps
            lm, _ = ctc_loss_grad(log_softmax(logits), target)
            logits[t, k] = orig
            assert grad[t, k] == pytest.approx((lp - lm) / (2 * eps), abs=1e-7)


def test_invalid_targets():
    lat = random_lattice(np.random.default_rng(2), 4, 3)
    with pytest.raises(ValueError):
        ctc_loss_grad(lat, [0, 1])  # blank in target
    with pytest.raises(ValueError):
        ctc_loss_grad(lat, [1, 5])  # symbol outside lattice
    with pytest.raises(TargetUnreachableError):
        ctc_loss_grad(lat, [1, 2, 1, 2, 1])  # needs 5 > 4 frames


def test_min_frames_counts_repeats():
    assert min_frames([]) == 0
    assert min_frames([1, 2, 3]) == 3
    assert min_frames([1, 1]) == 3  # repeat needs an interposed blank
    assert min_frames([1, 1, 1]) == 5


def test_empty_target_probability():
    # loss for the empty target is -sum log p(blank)
    lat = random_lattice(np.random.default_rng(3), 4, 3)
    loss, _ = ctc_loss_grad(lat, [])
    assert loss == pytest.approx(-lat[:, 0].sum())


def test_collapse_path():
    assert collapse_path([1, 1, 1, 0, 0, 2, 2, 2]) == [1, 2]
    assert collapse_path([1, 0, 1]) == [1, 1]
    assert collapse_path([0, 0, 0]) == []
    assert collapse_path([]) == []


def test_greedy_decode_on_constructed_lattice():
    alphabet = Alphabet(("_", "a", "b"))
    # frames argmax to a a _ b b
    logits = np.full((5, 3), -10.0)
    for t, k in enumerate([1, 1, 0, 2, 2]):
        logits[t, k] = 0.0
    assert greedy_decode(log_softmax(logits), alphabet) == "ab"


def test_postprocess_capitals():
    assert postprocess_capitals("HiHowAreYou") == "hi how are you"
    assert postprocess_capitals("Hello") == "hello"
    assert postprocess_capitals("") == ""
    assert postprocess_capitals("Don'tGo") == "don't go"


word = st.text(alphabet="abcdefghijklmnopqrstuvwxyz'", min_size=1,
               max_size=8).filter(lambda w: w[0].isalpha())


@given(st.lists(word, min_size=1, max_size=5))
def test_encode_decode_round_trip(ws):
    text = " ".join(ws)
    alphabet = Alphabet()
    raw = alphabet.to_string(encode_target(text, alphabet))
    assert postprocess_capitals(raw) == text


def test_default_alphabet():
    alphabet = Alphabet()
    assert alphabet.size == 54
    assert alphabet.blank == 0
    assert alphabet.symbols[0] == "_"
    assert alphabet.index("a") == 1
    assert alphabet.index("'") == 53
    with pytest.raises(KeyError):
        alphabet.index("?")
    with pytest.raises(ValueError):
        Alphabet(("a", "a"))


def test_mean_frame_entropy_uniform():
    S = 5
    lat = np.full((7, S), -np.log(S))
    assert mean_frame_entropy(lat) == pytest.approx(np.log(S))
