"""CTC loss with exact gradients, a brute-force oracle and greedy decoding.

All lattice math runs in the natural-log domain with log-sum-exp, so the
forward-backward recursion stays finite for per-frame probabilities down
to 1e-30.  The gradient is returned with respect to the logits that
produced the lattice through a log-softmax.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field

import numpy as np

NEG_INF = -np.inf


class TargetUnreachableError(ValueError):
    """Target cannot be emitted in the available number of frames."""


@dataclass(frozen=True)
class Alphabet:
    """CTC symbol inventory: blank, a-z, A-Z (word-initial markers), apostrophe."""
    symbols: tuple[str, ...] = field(default=("_",)
                                     + tuple(string.ascii_lowercase)
                                     + tuple(string.ascii_uppercase)
                                     + ("'",))

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")

    @property
    def blank(self) -> int:
        return 0

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, ch: str) -> int:
        try:
            return self.symbols.index(ch)
        except ValueError:
            raise KeyError(f"symbol {ch!r} not in alphabet") from None

    def to_string(self, indices) -> str:
        return "".join(self.symbols[i] for i in indices)


def _extend_with_blanks(target, blank: int):
    ext = [blank]
    for sym in target:
        ext.append(sym)
        ext.append(blank)
    return ext


def min_frames(target) -> int:
    """Minimum number of frames needed to emit `target` (repeats need a blank)."""
    n = len(target)
    repeats = sum(1 for i in range(1, n) if target[i] == target[i - 1])
    return n + repeats


def ctc_loss_grad(log_lattice: np.ndarray, target, blank: int = 0):
    """Negative log-likelihood of `target` under a T x S log-prob lattice.

    Returns (loss, grad) where grad is d(loss)/d(logits) for the logits
    whose log-softmax equals `log_lattice`.  Targets containing blanks are
    rejected; targets needing more frames than available raise
    TargetUnreachableError rather than yielding NaN/inf.
    """
    lat = np.asarray(log_lattice, dtype=np.float64)
    T, S = lat.shape
    target = list(target)
    if any(s == blank for s in target):
        raise ValueError("target may not contain the blank symbol")
    if any(not (0 <= s < S) for s in target):
        raise ValueError("target symbol outside lattice width")
    if min_frames(target) > T:
        raise TargetUnreachableError(
            f"target of length {len(target)} needs >= {min_frames(target)} frames, got {T}")

    ext = _extend_with_blanks(target, blank)
    L = len(ext)

    alpha = np.full((T, L), NEG_INF)
    alpha[0, 0] = lat[0, ext[0]]
    if L > 1:
        alpha[0, 1] = lat[0, ext[1]]
    for t in range(1, T):
        for s in range(L):
            terms = [alpha[t - 1, s]]
            if s >= 1:
                terms.append(alpha[t - 1, s - 1])
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                terms.append(alpha[t - 1, s - 2])
            alpha[t, s] = _logsumexp(terms) + lat[t, ext[s]]

    beta = np.full((T, L), NEG_INF)
    beta[T - 1, L - 1] = lat[T - 1, ext[L - 1]]
    if L > 1:
        beta[T - 1, L - 2] = lat[T - 1, ext[L - 2]]
    for t in range(T - 2, -1, -1):
        for s in range(L - 1, -1, -1):
            terms = [beta[t + 1, s]]
            if s + 1 < L:
                terms.append(beta[t + 1, s + 1])
            if s + 2 < L and ext[s] != blank and ext[s] != ext[s + 2]:
                terms.append(beta[t + 1, s + 2])
            beta[t, s] = _logsumexp(terms) + lat[t, ext[s]]

    log_p = _logsumexp([alpha[T - 1, L - 1],
                        alpha[T - 1, L - 2] if L > 1 else NEG_INF])
    loss = -log_p

    # d loss / d logit_{t,k} = y_{t,k} - (1/p) * sum_{s: ext[s]=k} alpha*beta / y_{t,k}
    grad = np.exp(lat)  # softmax probabilities
    for t in range(T):
        occ = np.full(S, NEG_INF)
        for s in range(L):
            g = alpha[t, s] + beta[t, s] - lat[t, ext[s]]
            occ[ext[s]] = np.logaddexp(occ[ext[s]], g)
        grad[t] -= np.exp(occ - log_p)
    return loss, grad


def _logsumexp(values) -> float:
    m = max(values)
    if m == NEG_INF:
        return NEG_INF
    return m + np.log(sum(np.exp(v - m) for v in values))


def collapse_path(path, blank: int = 0) -> list[int]:
    """Collapse consecutive repeats, then drop blanks."""
    out = []
    prev = None
    for sym in path:
        if sym != prev and sym != blank:
            out.append(sym)
        prev = sym
    return out


def ctc_bruteforce(log_lattice: np.ndarray, target, blank: int = 0) -> float:
    """Loss by explicit S^T path enumeration; verification oracle only."""
    lat = np.asarray(log_lattice, dtype=np.float64)
    T, S = lat.shape
    if T > 8 or S > 6:
        raise ValueError(f"brute force limited to T<=8, S<=6; got T={T}, S={S}")
    target = list(target)
    log_p = NEG_INF
    for path in itertools.product(range(S), repeat=T):
        if collapse_path(path, blank) == target:
            log_p = np.logaddexp(log_p, sum(lat[t, k] for t, k in enumerate(path)))
    return -log_p


def greedy_decode(log_lattice: np.ndarray, alphabet: Alphabet) -> str:
    """Best-path decoding: per-frame argmax, collapse repeats, drop blanks."""
    path = np.argmax(np.asarray(log_lattice), axis=1)
    return alphabet.to_string(collapse_path(path, alphabet.blank))


def postprocess_capitals(raw: str) -> str:
    """Turn word-initial capitals back into spaces: "HiHowAreYou" -> "hi how are you"."""
    out = []
    for ch in raw:
        if ch.isupper():
            out.append(" ")
            out.append(ch.lower())
        else:
            out.append(ch)
    return " ".join("".join(out).split())


def mean_frame_entropy(log_lattice: np.ndarray) -> float:
    """Average per-frame entropy (nats) of the lattice distribution."""
    lat = np.asarray(log_lattice, dtype=np.float64)
    p = np.exp(lat)
    ent = -(p * np.where(p > 0, lat, 0.0)).sum(axis=1)
    return float(ent.mean())
