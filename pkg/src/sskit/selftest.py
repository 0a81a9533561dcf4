"""Built-in oracle suites: brute-force CTC equivalence, finite-difference
gradient checks, metric oracles, FFT-vs-DFT and the decoding micro-checks.

Each suite returns (name, passed, detail); the CLI `selftest` subcommand
runs them all and exits nonzero on any failure.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from . import ctc as ctc_mod
from .audio_frontend import fft, naive_dft
from .ctc import TargetUnreachableError
from .eval_report import cer, edit_distance
from .nn_core import (LSTM, MLSTM, SeqBatchNorm, finite_difference_check,
                      log_softmax, logistic_regression)


def random_log_lattice(rng, T, S):
    logits = rng.normal(size=(T, S))
    return log_softmax(logits)


def check_ctc_oracle(n_cases: int = 200, seed: int = 0, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        T = int(rng.integers(2, 7))
        S = int(rng.integers(2, 5))
        lat = random_log_lattice(rng, T, S)
        target = [int(s) for s in rng.integers(1, S, size=rng.integers(0, 4))]
        try:
            dp_loss, _ = ctc_mod.ctc_loss_grad(lat, target)
        except TargetUnreachableError:
            continue
        bf_loss = ctc_mod.ctc_bruteforce(lat, target)
        worst = max(worst, abs(dp_loss - bf_loss))
    return "ctc_bruteforce_equivalence", worst <= tol, f"max |dp - bf| = {worst:.3e}"


def check_ctc_gradient(n_cases: int = 20, seed: int = 1, tol: float = 1e-5):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        T = int(rng.integers(3, 7))
        S = int(rng.integers(3, 6))
        logits = rng.normal(size=(T, S))
        target = [int(s) for s in rng.integers(1, S, size=rng.integers(1, 3))]
        if ctc_mod.min_frames(target) > T:
            continue
        _, grad = ctc_mod.ctc_loss_grad(log_softmax(logits), target)
        eps = 1e-6
        for _ in range(5):
            t, k = int(rng.integers(T)), int(rng.integers(S))
            orig = logits[t, k]
            logits[t, k] = orig + eps
            lp, _ = ctc_mod.ctc_loss_grad(log_softmax(logits), target)
            logits[t, k] = orig - eps
            lm, _ = ctc_mod.ctc_loss_grad(log_softmax(logits), target)
            logits[t, k] = orig
            fd = (lp - lm) / (2 * eps)
            denom = max(abs(fd) + abs(grad[t, k]), 1e-8)
            worst = max(worst, abs(fd - grad[t, k]) / denom)
    return "ctc_gradient_fd", worst <= tol, f"max rel err = {worst:.3e}"


def _layer_fd(build, n_cases, seed, tol, name):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        loss_fn, blocks = build(rng)
        loss_fn(compute_grads=True)
        err = finite_difference_check(lambda: loss_fn(compute_grads=False),
                                      blocks, eps=1e-5, n_samples=4, rng=rng)
        worst = max(worst, err)
    return name, worst <= tol, f"max rel err = {worst:.3e}"


def _lstm_case(rng, cls):
    T, B, D, H = int(rng.integers(2, 5)), 2, 3, 4
    layer = cls(D, H, rng, "chk")
    xs = rng.normal(size=(T, B, D))
    w = rng.normal(size=H)

    def loss_fn(compute_grads=False):
        hs = layer.forward(xs)
        loss = float(np.sum(np.tanh(hs) @ w))
        if compute_grads:
            for p in layer.params():
                p.zero_grad()
            dhs = (1 - np.tanh(hs) ** 2) * w
            layer.backward(dhs)
        return loss

    return loss_fn, layer.params()


def check_lstm_gradient(n_cases=20, seed=2, tol=1e-5):
    return _layer_fd(lambda rng: _lstm_case(rng, LSTM), n_cases, seed, tol,
                     "lstm_gradient_fd")


def check_mlstm_gradient(n_cases=20, seed=3, tol=1e-5):
    return _layer_fd(lambda rng: _lstm_case(rng, MLSTM), n_cases, seed, tol,
                     "mlstm_gradient_fd")


def _bn_case(rng):
    N, D = 6, 3
    bn = SeqBatchNorm(D, "chk")
    bn.gamma.values[...] = rng.normal(size=D)
    bn.beta.values[...] = rng.normal(size=D)
    x = rng.normal(size=(N, D))
    w = rng.normal(size=D)

    def loss_fn(compute_grads=False):
        y = bn.forward(x, mode="train")
        loss = float(np.sum(np.tanh(y) @ w))
        if compute_grads:
            for p in bn.params():
                p.zero_grad()
            bn.backward((1 - np.tanh(y) ** 2) * w)
        return loss

    return loss_fn, bn.params()


def check_batchnorm_gradient(n_cases=20, seed=4, tol=1e-5):
    return _layer_fd(_bn_case, n_cases, seed, tol, "batchnorm_gradient_fd")


def check_logreg_gradient(n_cases=20, seed=5, tol=1e-6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        n, d = 8, 4
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, size=n).astype(float)
        w = rng.normal(size=d)
        b = float(rng.normal())
        l2_c = float(rng.uniform(0.1, 10))
        _, _, dw, db = logistic_regression(X, w, b, y, l2_c)
        eps = 1e-6
        for j in range(d + 1):
            def f(wj, bj):
                _, loss, _, _ = logistic_regression(X, wj, bj, y, l2_c)
                return loss
            if j < d:
                e = np.zeros(d); e[j] = eps
                fd = (f(w + e, b) - f(w - e, b)) / (2 * eps)
                an = dw[j]
            else:
                fd = (f(w, b + eps) - f(w, b - eps)) / (2 * eps)
                an = db
            worst = max(worst, abs(fd - an) / max(abs(fd) + abs(an), 1e-8))
    return "logreg_gradient_fd", worst <= tol, f"max rel err = {worst:.3e}"


def check_word_cnn_gradient(n_cases=20, seed=6, tol=1e-5):
    from .sentiment import PAD_WORD, UNK_WORD, TextCNN
    rng = np.random.default_rng(seed)
    vocab = {UNK_WORD: 0, PAD_WORD: 1}
    for w in "aa bb cc dd ee ff gg".split():
        vocab[w] = len(vocab)
    worst = 0.0
    for case in range(n_cases):
        model = TextCNN(vocab, emb_dim=4, n_filters=3, widths=(2, 3),
                        hidden=5, seed=case)
        ids = [int(i) for i in rng.integers(0, len(vocab), size=6)]
        y = float(rng.integers(0, 2))

        def loss_fn(compute_grads=False):
            if compute_grads:
                for p in model.params():
                    p.zero_grad()
                return model.loss_and_grad(ids, y)
            p = model.forward(ids)
            eps = 1e-12
            return float(-(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))

        loss_fn(compute_grads=True)
        err = finite_difference_check(lambda: loss_fn(False), model.params(),
                                      eps=1e-5, n_samples=4, rng=rng)
        worst = max(worst, err)
    return "word_cnn_gradient_fd", worst <= tol, f"max rel err = {worst:.3e}"


def recursive_edit_distance(a, b):
    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(rec(i - 1, j) + 1, rec(i, j - 1) + 1,
                   rec(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return rec(len(a), len(b))


def check_edit_distance_oracle(seed=7):
    rng = np.random.default_rng(seed)
    sigma = "abc"
    # exhaustive up to length 3, random sample up to length 8
    words = [""]
    for L in (1, 2, 3):
        words += ["".join(t) for t in itertools.product(sigma, repeat=L)]
    ok = all(edit_distance(a, b) == recursive_edit_distance(a, b)
             for a in words for b in words)
    for _ in range(1000):
        a = "".join(rng.choice(list(sigma), size=rng.integers(0, 9)))
        b = "".join(rng.choice(list(sigma), size=rng.integers(0, 9)))
        ok = ok and edit_distance(a, b) == recursive_edit_distance(a, b)
    return "edit_distance_oracle", ok, "DP == recursive"


def check_fft_oracle():
    rng = np.random.default_rng(8)
    worst = 0.0
    n = 2
    while n <= 512:
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        worst = max(worst, float(np.max(np.abs(fft(x) - naive_dft(x)))))
        n *= 2
    return "fft_vs_naive_dft", worst <= 1e-8, f"max abs diff = {worst:.3e}"


def check_decoding_microchecks():
    ok = ctc_mod.postprocess_capitals("HiHowAreYou") == "hi how are you"
    alphabet = ctc_mod.Alphabet(("_", "a", "b"))
    path = [1, 1, 1, 0, 0, 2, 2, 2]
    ok = ok and alphabet.to_string(ctc_mod.collapse_path(path)) == "ab"
    ok = ok and abs(cer("i hated it", "i haved i") - 0.25) < 1e-12
    ok = ok and abs(cer("it was terrible", "ws terrible i") - 4 / 13) < 1e-12
    return "decoding_microchecks", ok, "post-processing and CER table rows"


ALL_CHECKS = (
    check_ctc_oracle,
    check_ctc_gradient,
    check_lstm_gradient,
    check_mlstm_gradient,
    check_batchnorm_gradient,
    check_logreg_gradient,
    check_word_cnn_gradient,
    check_edit_distance_oracle,
    check_fft_oracle,
    check_decoding_microchecks,
)


def run_all(verbose: bool = True) -> bool:
    all_ok = True
    for check in ALL_CHECKS:
        name, ok, detail = check()
        all_ok = all_ok and ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
