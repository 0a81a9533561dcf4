"""Numerical primitives with hand-written backward passes.

Everything runs in float64.  Layers cache their forward activations and
accumulate gradients into ParameterBlock.grads; the optimizer consumes
and zeroes them.  Every backward pass is verifiable against
finite_difference_check, which is the master correctness oracle.

Sequence tensors are time-major: [T, B, D] (B may be 1).
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    """A parameter, activation or gradient stopped being finite."""


class ParameterBlock:
    """Named tensor plus its gradient accumulator."""

    def __init__(self, name: str, values: np.ndarray):
        self.name = name
        self.values = np.asarray(values, dtype=np.float64)
        self.grads = np.zeros_like(self.values)

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grads[...] = 0.0

    def __repr__(self):
        return f"ParameterBlock({self.name!r}, shape={self.values.shape})"


def init_weight(rng, shape) -> np.ndarray:
    """Uniform +-1/sqrt(fan_in); fan_in is the last dimension."""
    bound = 1.0 / np.sqrt(shape[-1])
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60, 60)))


def softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


# ---------------------------------------------------------------------------
# Dense


class Dense:
    def __init__(self, n_in: int, n_out: int, rng, name: str = "dense"):
        self.w = ParameterBlock(f"{name}.w", init_weight(rng, (n_out, n_in)))
        self.b = ParameterBlock(f"{name}.b", np.zeros(n_out))

    def params(self):
        return [self.w, self.b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.w.values.T + self.b.values

    def backward(self, dout: np.ndarray) -> np.ndarray:
        flat_x = self._x.reshape(-1, self._x.shape[-1])
        flat_d = dout.reshape(-1, dout.shape[-1])
        self.w.grads += flat_d.T @ flat_x
        self.b.grads += flat_d.sum(axis=0)
        return dout @ self.w.values


# ---------------------------------------------------------------------------
# LSTM

_GATES = 4  # order: input, forget, output, candidate


class LSTMParams:
    def __init__(self, n_in: int, n_hidden: int, rng, name: str = "lstm"):
        h = n_hidden
        self.wx = ParameterBlock(f"{name}.wx", init_weight(rng, (_GATES * h, n_in)))
        self.wh = ParameterBlock(f"{name}.wh", init_weight(rng, (_GATES * h, h)))
        b = np.zeros(_GATES * h)
        b[h:2 * h] = 1.0  # forget-gate bias
        self.b = ParameterBlock(f"{name}.b", b)
        self.n_hidden = h

    def params(self):
        return [self.wx, self.wh, self.b]


def lstm_step(x, h_prev, c_prev, p: LSTMParams):
    """One LSTM step; x [.., D], states [.., H]."""
    h = p.n_hidden
    a = x @ p.wx.values.T + h_prev @ p.wh.values.T + p.b.values
    i = sigmoid(a[..., :h])
    f = sigmoid(a[..., h:2 * h])
    o = sigmoid(a[..., 2 * h:3 * h])
    g = np.tanh(a[..., 3 * h:])
    c = f * c_prev + i * g
    h_new = o * np.tanh(c)
    if not (np.all(np.isfinite(h_new)) and np.all(np.isfinite(c))):
        raise NonFiniteError("non-finite LSTM state")
    return h_new, c


class LSTM:
    """Unidirectional LSTM over [T, B, D] with full BPTT."""

    def __init__(self, n_in: int, n_hidden: int, rng, name: str = "lstm"):
        self.p = LSTMParams(n_in, n_hidden, rng, name)
        self.n_hidden = n_hidden

    def params(self):
        return self.p.params()

    def forward(self, xs: np.ndarray, h0=None, c0=None) -> np.ndarray:
        T, B, _ = xs.shape
        H = self.n_hidden
        h = np.zeros((B, H)) if h0 is None else h0
        c = np.zeros((B, H)) if c0 is None else c0
        self._cache = []
        hs = np.empty((T, B, H))
        p = self.p
        for t in range(T):
            x = xs[t]
            a = x @ p.wx.values.T + h @ p.wh.values.T + p.b.values
            i = sigmoid(a[:, :H])
            f = sigmoid(a[:, H:2 * H])
            o = sigmoid(a[:, 2 * H:3 * H])
            g = np.tanh(a[:, 3 * H:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            self._cache.append((x, h, c, i, f, o, g, tc))
            h, c = h_new, c_new
            hs[t] = h
        if not np.all(np.isfinite(hs)):
            raise NonFiniteError("non-finite LSTM activations")
        self._xs_shape = xs.shape
        self._last_state = (h, c)
        return hs

    @property
    def last_state(self):
        return self._last_state

    def backward(self, dhs: np.ndarray, dh_last=None, dc_last=None) -> np.ndarray:
        T, B, _ = self._xs_shape
        H = self.n_hidden
        p = self.p
        dxs = np.empty(self._xs_shape)
        dh_next = np.zeros((B, H)) if dh_last is None else dh_last.copy()
        dc_next = np.zeros((B, H)) if dc_last is None else dc_last.copy()
        for t in range(T - 1, -1, -1):
            x, h_prev, c_prev, i, f, o, g, tc = self._cache[t]
            dh = dhs[t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc ** 2) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            da = np.concatenate([di * i * (1 - i),
                                 df * f * (1 - f),
                                 do * o * (1 - o),
                                 dg * (1 - g ** 2)], axis=1)
            p.wx.grads += da.T @ x
            p.wh.grads += da.T @ h_prev
            p.b.grads += da.sum(axis=0)
            dxs[t] = da @ p.wx.values
            dh_next = da @ p.wh.values
            dc_next = dc * f
        return dxs


class BiLSTM:
    """Forward and backward LSTMs with per-timestep concatenation (dim 2H)."""

    def __init__(self, n_in: int, n_hidden: int, rng, name: str = "bilstm"):
        self.fwd = LSTM(n_in, n_hidden, rng, f"{name}.fwd")
        self.bwd = LSTM(n_in, n_hidden, rng, f"{name}.bwd")
        self.n_hidden = n_hidden

    def params(self):
        return self.fwd.params() + self.bwd.params()

    def forward(self, xs: np.ndarray) -> np.ndarray:
        if xs.shape[0] == 0:
            raise ValueError("empty sequence")
        hf = self.fwd.forward(xs)
        hb = self.bwd.forward(xs[::-1])[::-1]
        return np.concatenate([hf, hb], axis=-1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        H = self.n_hidden
        dxf = self.fwd.backward(dout[..., :H])
        dxb = self.bwd.backward(dout[::-1, :, H:])[::-1]
        return dxf + dxb


def bilstm_layer(seq: np.ndarray, layer: BiLSTM) -> np.ndarray:
    """Run one [T, D] sequence through a BiLSTM, returning [T, 2H]."""
    return layer.forward(np.asarray(seq)[:, None, :])[:, 0, :]


# ---------------------------------------------------------------------------
# Multiplicative LSTM (Krause et al. formulation)


class MLSTMParams:
    def __init__(self, n_in: int, n_hidden: int, rng, name: str = "mlstm"):
        h = n_hidden
        self.wmx = ParameterBlock(f"{name}.wmx", init_weight(rng, (h, n_in)))
        self.wmh = ParameterBlock(f"{name}.wmh", init_weight(rng, (h, h)))
        self.wx = ParameterBlock(f"{name}.wx", init_weight(rng, (_GATES * h, n_in)))
        self.wm = ParameterBlock(f"{name}.wm", init_weight(rng, (_GATES * h, h)))
        b = np.zeros(_GATES * h)
        b[h:2 * h] = 1.0
        self.b = ParameterBlock(f"{name}.b", b)
        self.n_hidden = h

    def params(self):
        return [self.wmx, self.wmh, self.wx, self.wm, self.b]


def mlstm_step(x, h_prev, c_prev, p: MLSTMParams):
    """One mLSTM step: the recurrent path is modulated by m = (Wmx x) * (Wmh h)."""
    h = p.n_hidden
    m = (x @ p.wmx.values.T) * (h_prev @ p.wmh.values.T)
    a = x @ p.wx.values.T + m @ p.wm.values.T + p.b.values
    i = sigmoid(a[..., :h])
    f = sigmoid(a[..., h:2 * h])
    o = sigmoid(a[..., 2 * h:3 * h])
    g = np.tanh(a[..., 3 * h:])
    c = f * c_prev + i * g
    h_new = o * np.tanh(c)
    if not (np.all(np.isfinite(h_new)) and np.all(np.isfinite(c))):
        raise NonFiniteError("non-finite mLSTM state")
    return h_new, c


class MLSTM:
    """Multiplicative LSTM over [T, B, D] with full BPTT."""

    def __init__(self, n_in: int, n_hidden: int, rng, name: str = "mlstm"):
        self.p = MLSTMParams(n_in, n_hidden, rng, name)
        self.n_hidden = n_hidden

    def params(self):
        return self.p.params()

    def forward(self, xs: np.ndarray, h0=None, c0=None) -> np.ndarray:
        T, B, _ = xs.shape
        H = self.n_hidden
        h = np.zeros((B, H)) if h0 is None else h0
        c = np.zeros((B, H)) if c0 is None else c0
        p = self.p
        self._cache = []
        hs = np.empty((T, B, H))
        for t in range(T):
            x = xs[t]
            mx = x @ p.wmx.values.T
            mh = h @ p.wmh.values.T
            m = mx * mh
            a = x @ p.wx.values.T + m @ p.wm.values.T + p.b.values
            i = sigmoid(a[:, :H])
            f = sigmoid(a[:, H:2 * H])
            o = sigmoid(a[:, 2 * H:3 * H])
            g = np.tanh(a[:, 3 * H:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            self._cache.append((x, h, c, mx, mh, i, f, o, g, tc))
            h, c = o * tc, c_new
            hs[t] = h
        if not np.all(np.isfinite(hs)):
            raise NonFiniteError("non-finite mLSTM activations")
        self._xs_shape = xs.shape
        self._last_state = (h, c)
        return hs

    @property
    def last_state(self):
        return self._last_state

    def backward(self, dhs: np.ndarray, dh_last=None, dc_last=None) -> np.ndarray:
        T, B, _ = self._xs_shape
        H = self.n_hidden
        p = self.p
        dxs = np.empty(self._xs_shape)
        dh_next = np.zeros((B, H)) if dh_last is None else dh_last.copy()
        dc_next = np.zeros((B, H)) if dc_last is None else dc_last.copy()
        for t in range(T - 1, -1, -1):
            x, h_prev, c_prev, mx, mh, i, f, o, g, tc = self._cache[t]
            dh = dhs[t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc ** 2) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            da = np.concatenate([di * i * (1 - i),
                                 df * f * (1 - f),
                                 do * o * (1 - o),
                                 dg * (1 - g ** 2)], axis=1)
            dm = da @ p.wm.values
            dmx = dm * mh
            dmh = dm * mx
            p.wx.grads += da.T @ x
            p.wm.grads += da.T @ (mx * mh)
            p.b.grads += da.sum(axis=0)
            p.wmx.grads += dmx.T @ x
            p.wmh.grads += dmh.T @ h_prev
            dxs[t] = da @ p.wx.values + dmx @ p.wmx.values
            dh_next = dmh @ p.wmh.values
            dc_next = dc * f
        return dxs


# ---------------------------------------------------------------------------
# Sequence batch normalization

BN_EPS = 1e-5
BN_MOMENTUM = 0.99


class SeqBatchNorm:
    """Batch norm with statistics over all (batch x time) rows per feature.

    Train mode uses batch statistics and updates running averages with
    momentum 0.99; eval mode uses the frozen running statistics.
    """

    def __init__(self, dim: int, name: str = "bn"):
        self.gamma = ParameterBlock(f"{name}.gamma", np.ones(dim))
        self.beta = ParameterBlock(f"{name}.beta", np.zeros(dim))
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def params(self):
        return [self.gamma, self.beta]

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        """x is [N, D]: all frames of the batch concatenated along time."""
        if mode == "train":
            if x.shape[0] < 2:
                raise ValueError("train-mode batch norm needs >= 2 rows")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean = BN_MOMENTUM * self.running_mean + (1 - BN_MOMENTUM) * mean
            self.running_var = BN_MOMENTUM * self.running_var + (1 - BN_MOMENTUM) * var
        elif mode == "eval":
            mean, var = self.running_mean, self.running_var
        else:
            raise ValueError(f"unknown mode {mode!r}")
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - mean) * inv
        self._cache = (xhat, inv, mode)
        return self.gamma.values * xhat + self.beta.values

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xhat, inv, mode = self._cache
        self.beta.grads += dout.sum(axis=0)
        self.gamma.grads += (dout * xhat).sum(axis=0)
        dxhat = dout * self.gamma.values
        if mode == "eval":
            return dxhat * inv
        n = dout.shape[0]
        return (inv / n) * (n * dxhat - dxhat.sum(axis=0)
                            - xhat * (dxhat * xhat).sum(axis=0))


def seq_batchnorm(seqs, bn: SeqBatchNorm, mode: str = "train"):
    """Apply a SeqBatchNorm to a list of [T_i, D] sequences jointly."""
    if mode == "train" and len(seqs) < 2:
        raise ValueError("train-mode sequence batch norm needs a batch of >= 2")
    lengths = [s.shape[0] for s in seqs]
    out = bn.forward(np.vstack(seqs), mode)
    return list(np.split(out, np.cumsum(lengths)[:-1]))


# ---------------------------------------------------------------------------
# Logistic regression


def logistic_regression(X, w, b, labels=None, l2_c: float = 1.0):
    """Binary logistic regression head.

    Returns p when labels is None; otherwise (p, loss, dw, db) where
    loss = mean cross-entropy + ||w||^2 / (2 * l2_c).
    """
    if l2_c <= 0:
        raise ValueError("l2_c must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    z = X @ w + b
    p = sigmoid(z)
    if labels is None:
        return p
    y = np.asarray(labels, dtype=np.float64)
    n = len(y)
    eps = 1e-12
    ce = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    loss = ce + (w @ w) / (2.0 * l2_c)
    dz = (p - y) / n
    dw = X.T @ dz + w / l2_c
    db = dz.sum()
    return p, loss, dw, db


# ---------------------------------------------------------------------------
# Optimization


def clip_global_norm(blocks, threshold: float = 400.0) -> float:
    """Scale all gradients so the global L2 norm is at most threshold.

    Returns the pre-clip global norm.
    """
    total = 0.0
    for blk in blocks:
        total += float(np.sum(blk.grads ** 2))
    norm = np.sqrt(total)
    if norm > threshold:
        scale = threshold / norm
        for blk in blocks:
            blk.grads *= scale
    return norm


class SgdNesterov:
    """SGD with Nesterov momentum: v <- mu*v - lr*grad(theta + mu*v).

    Parameters are stored at the lookahead point theta + mu*v, which is
    where gradients are evaluated; as v -> 0 this coincides with theta.
    """

    def __init__(self, lr: float = 1e-4, momentum: float = 0.9,
                 clip_norm: float | None = 400.0):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self._velocity: dict[int, np.ndarray] = {}

    def step(self, blocks) -> None:
        for blk in blocks:
            if not np.all(np.isfinite(blk.grads)):
                raise NonFiniteError(f"non-finite gradient in {blk.name}")
        if self.clip_norm is not None:
            clip_global_norm(blocks, self.clip_norm)
        mu = self.momentum
        for blk in blocks:
            v = self._velocity.setdefault(id(blk), np.zeros_like(blk.values))
            v_new = mu * v - self.lr * blk.grads
            blk.values += -mu * v + (1 + mu) * v_new
            self._velocity[id(blk)] = v_new
            blk.zero_grad()


# ---------------------------------------------------------------------------
# Finite-difference oracle


def finite_difference_check(loss_fn, blocks, eps: float = 1e-5,
                            n_samples: int = 10, rng=None) -> float:
    """Max relative error between analytic grads and central differences.

    `blocks` must already hold analytic gradients for the loss that
    loss_fn() recomputes from the current parameter values.  Coordinates
    are sampled per block.
    """
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for blk in blocks:
        flat = blk.values.reshape(-1)
        gflat = blk.grads.reshape(-1)
        n = min(n_samples, flat.size)
        for idx in rng.choice(flat.size, size=n, replace=False):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = loss_fn()
            flat[idx] = orig - eps
            f_minus = loss_fn()
            flat[idx] = orig
            fd = (f_plus - f_minus) / (2 * eps)
            an = gflat[idx]
            denom = max(abs(fd) + abs(an), 1e-8)
            worst = max(worst, abs(fd - an) / denom)
    return worst
