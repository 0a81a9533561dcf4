import numpy as np
import pytest

from sskit.nn_core import (BiLSTM, LSTM, MLSTM, Dense, LSTMParams,
                           NonFiniteError, ParameterBlock, SeqBatchNorm,
                           SgdNesterov, clip_global_norm,
                           finite_difference_check, init_weight, log_softmax,
                           logistic_regression, lstm_step, mlstm_step,
                           seq_batchnorm, sigmoid, softmax)


def test_init_weight_bounds():
    rng = np.random.default_rng(0)
    w = init_weight(rng, (100, 16))
    assert np.max(np.abs(w)) <= 1.0 / 4.0


def test_softmax_log_softmax():
    x = np.random.default_rng(1).normal(size=(3, 5)) * 50
    p = softmax(x)
    assert np.allclose(p.sum(axis=-1), 1.0)
    assert np.allclose(np.exp(log_softmax(x)), p)
    assert sigmoid(0.0) == 0.5


def test_dense_gradient():
    rng = np.random.default_rng(2)
    layer = Dense(4, 3, rng)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=3)

    def loss_fn():
        return float(np.sum(layer.forward(x) @ w))

    loss_fn()
    for p in layer.params():
        p.zero_grad()
    layer.backward(np.broadcast_to(w, (5, 3)).copy())
    assert finite_difference_check(loss_fn, layer.params(), rng=rng) < 1e-7


def test_lstm_step_zero_input_zero_state():
    rng = np.random.default_rng(3)
    p = LSTMParams(3, 4, rng)
    p.wx.values[...] = 0.0
    p.wh.values[...] = 0.0
    h, c = lstm_step(np.zeros(3), np.zeros(4), np.ones(4), p)
    # forget bias +1: c = sigmoid(1) * c_prev, h = 0.5 * tanh(c)
    f = 1.0 / (1.0 + np.exp(-1.0))
    assert np.allclose(c, f)
    assert np.allclose(h, 0.5 * np.tanh(f))


def test_lstm_forward_matches_step():
    rng = np.random.default_rng(4)
    layer = LSTM(3, 4, rng)
    xs = rng.normal(size=(5, 2, 3))
    hs = layer.forward(xs)
    h = np.zeros((2, 4))
    c = np.zeros((2, 4))
    for t in range(5):
        h, c = lstm_step(xs[t], h, c, layer.p)
        assert np.allclose(hs[t], h)
    assert np.allclose(layer.last_state[0], h)
    assert np.allclose(layer.last_state[1], c)


def test_mlstm_step_runs():
    rng = np.random.default_rng(5)
    model = MLSTM(3, 4, rng)
    xs = rng.normal(size=(6, 2, 3))
    hs = model.forward(xs)
    h = np.zeros((2, 4))
    c = np.zeros((2, 4))
    for t in range(6):
        h, c = mlstm_step(xs[t], h, c, model.p)
        assert np.allclose(hs[t], h)


def test_bilstm_concatenates_directions():
    rng = np.random.default_rng(6)
    layer = BiLSTM(3, 4, rng)
    xs = rng.normal(size=(5, 2, 3))
    out = layer.forward(xs)
    assert out.shape == (5, 2, 8)
    assert np.allclose(out[..., :4], layer.fwd.forward(xs))
    assert np.allclose(out[..., 4:], layer.bwd.forward(xs[::-1])[::-1])
    with pytest.raises(ValueError):
        layer.forward(np.zeros((0, 2, 3)))


def test_batchnorm_train_statistics():
    rng = np.random.default_rng(7)
    bn = SeqBatchNorm(3)
    x = rng.normal(5.0, 2.0, size=(50, 3))
    y = bn.forward(x, mode="train")
    assert np.allclose(y.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(y.std(axis=0), 1.0, atol=1e-3)
    with pytest.raises(ValueError):
        bn.forward(x[:1], mode="train")
    with pytest.raises(ValueError):
        bn.forward(x, mode="banana")


def test_batchnorm_eval_uses_running_stats():
    bn = SeqBatchNorm(2)
    bn.running_mean = np.array([1.0, -1.0])
    bn.running_var = np.array([4.0, 1.0])
    y = bn.forward(np.array([[3.0, 0.0]]), mode="eval")
    assert np.allclose(y, [[2.0 / np.sqrt(4 + 1e-5), 1.0 / np.sqrt(1 + 1e-5)]])


def test_seq_batchnorm_splits_lengths():
    rng = np.random.default_rng(8)
    seqs = [rng.normal(size=(4, 3)), rng.normal(size=(7, 3))]
    out = seq_batchnorm(seqs, SeqBatchNorm(3), mode="train")
    assert [o.shape for o in out] == [(4, 3), (7, 3)]
    with pytest.raises(ValueError):
        seq_batchnorm(seqs[:1], SeqBatchNorm(3), mode="train")


def test_logistic_regression_modes():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(6, 3))
    w = rng.normal(size=3)
    p = logistic_regression(X, w, 0.1)
    assert p.shape == (6,) and np.all((0 < p) & (p < 1))
    _, loss, _, _ = logistic_regression(X, w, 0.1, labels=np.ones(6), l2_c=2.0)
    assert np.isfinite(loss)
    with pytest.raises(ValueError):
        logistic_regression(X, w, 0.1, labels=np.ones(6), l2_c=0.0)


def test_clip_global_norm():
    a = ParameterBlock("a", np.zeros(4))
    a.grads[...] = 3.0
    b = ParameterBlock("b", np.zeros(4))
    b.grads[...] = 4.0
    norm = clip_global_norm([a, b], threshold=5.0)
    assert norm == pytest.approx(10.0)
    assert np.sqrt(np.sum(a.grads ** 2) + np.sum(b.grads ** 2)) \
        == pytest.approx(5.0)
    small = ParameterBlock("c", np.zeros(2))
    small.grads[...] = 0.1
    assert clip_global_norm([small], 5.0) == pytest.approx(np.sqrt(0.02))
    assert np.all(small.grads == 0.1)  # untouched below the threshold


def test_sgd_momentum_zero_is_plain_sgd():
    blk = ParameterBlock("w", np.array([1.0, -2.0]))
    blk.grads[...] = np.array([0.5, -0.5])
    SgdNesterov(lr=0.1, momentum=0.0, clip_norm=None).step([blk])
    assert np.allclose(blk.values, [0.95, -1.95])
    assert np.all(blk.grads == 0.0)  # consumed


def test_sgd_converges_on_quadratic_bowl():
    blk = ParameterBlock("w", np.array([5.0, -3.0]))
    opt = SgdNesterov(lr=0.1, momentum=0.9, clip_norm=None)
    for _ in range(200):
        blk.grads[...] = blk.values  # d/dw of ||w||^2 / 2
        opt.step([blk])
    assert np.max(np.abs(blk.values)) < 1e-6


def test_sgd_rejects_nonfinite_gradients():
    blk = ParameterBlock("w", np.zeros(2))
    blk.grads[...] = np.array([np.nan, 0.0])
    with pytest.raises(NonFiniteError):
        SgdNesterov(lr=0.1).step([blk])


def test_finite_difference_check_catches_bad_gradient():
    rng = np.random.default_rng(10)
    layer = Dense(3, 2, rng)
    x = rng.normal(size=(4, 3))

    def loss_fn():
        return float(layer.forward(x).sum())

    loss_fn()
    for p in layer.params():
        p.zero_grad()
    layer.backward(np.ones((4, 2)))
    layer.w.grads += 1.0  # corrupt the analytic gradient
    assert finite_difference_check(loss_fn, layer.params(), rng=rng) > 0.01
