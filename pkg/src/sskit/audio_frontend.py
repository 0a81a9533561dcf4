"""Acoustic frontend: spectrograms, mel features, frame stacking,
MFCCs and the reduced functional feature vector for the sentiment branch.

Windowing follows the ASR setup: 25 ms Hamming window (400 samples at
16 kHz), 10 ms hop (160 samples), zero-padded to a 512-point FFT.  The
FFT is a radix-2 iterative implementation checked against a naive DFT.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE = 16000
WIN_SAMPLES = 400
HOP_SAMPLES = 160
FFT_SIZE = 512
N_BINS = FFT_SIZE // 2 + 1
FRAME_SHIFT = HOP_SAMPLES / SAMPLE_RATE
LOG_FLOOR = 1e-10

CACHE_MAGIC = b"SSKF"
CACHE_VERSION = 1


class AudioTooShortError(ValueError):
    """Input shorter than one analysis window."""


@dataclass
class FeatureMatrix:
    data: np.ndarray  # frames x dims
    frame_shift: float = FRAME_SHIFT

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# FFT


def fft(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 FFT over the last axis; length must be a power of 2.

    Accepts batched input (frames x n).  Kept in-module so the frontend is
    self-contained and checkable against naive_dft.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n & (n - 1) or n == 0:
        raise ValueError(f"FFT size must be a power of two, got {n}")
    levels = n.bit_length() - 1
    # bit-reversal permutation
    idx = np.arange(n)
    rev = np.zeros(n, dtype=int)
    for b in range(levels):
        rev |= ((idx >> b) & 1) << (levels - 1 - b)
    y = x[..., rev]
    half = 1
    while half < n:
        tw = np.exp(-2j * np.pi * np.arange(half) / (2 * half))
        y = y.reshape(y.shape[:-1] + (n // (2 * half), 2 * half))
        even = y[..., :half]
        odd = y[..., half:] * tw
        y = np.concatenate([even + odd, even - odd], axis=-1)
        y = y.reshape(y.shape[:-2] + (n,))
        half *= 2
    return y


def naive_dft(x: np.ndarray) -> np.ndarray:
    """Direct O(n^2) DFT; oracle for fft()."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return x @ basis.T


# ---------------------------------------------------------------------------
# Spectrograms and mel features


def hamming(n: int) -> np.ndarray:
    return 0.54 - 0.46 * np.cos(2 * np.pi * np.arange(n) / (n - 1))


def frame_count(n_samples: int) -> int:
    if n_samples < WIN_SAMPLES:
        raise AudioTooShortError(
            f"need >= {WIN_SAMPLES} samples, got {n_samples}")
    return 1 + (n_samples - WIN_SAMPLES) // HOP_SAMPLES


def _frame_signal(samples: np.ndarray) -> np.ndarray:
    n_frames = frame_count(len(samples))
    idx = (np.arange(WIN_SAMPLES)[None, :]
           + HOP_SAMPLES * np.arange(n_frames)[:, None])
    return np.asarray(samples, dtype=np.float64)[idx]


def stft_power(samples) -> FeatureMatrix:
    """Power spectrogram, frames x 257."""
    frames = _frame_signal(np.asarray(samples)) * hamming(WIN_SAMPLES)
    padded = np.zeros((frames.shape[0], FFT_SIZE))
    padded[:, :WIN_SAMPLES] = frames
    spec = fft(padded)[:, :N_BINS]
    return FeatureMatrix(np.abs(spec) ** 2)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass
class MelFilterbank:
    """Triangular mel filterbank over 0-8000 Hz, 40 filters by default.

    `edges` are the 42 Hz breakpoints; filter j rises from edges[j] to its
    center edges[j+1] and falls to edges[j+2], evaluated at FFT bin
    frequencies.
    """
    n_filters: int = 40
    fft_size: int = FFT_SIZE
    sample_rate: int = SAMPLE_RATE
    edges: np.ndarray = None
    weights: np.ndarray = field(init=False, default=None)

    def __post_init__(self):
        if self.edges is None:
            mels = np.linspace(hz_to_mel(0.0), hz_to_mel(self.sample_rate / 2),
                               self.n_filters + 2)
            self.edges = mel_to_hz(mels)
        self.edges = np.asarray(self.edges, dtype=np.float64)
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("filterbank edge frequencies must be strictly increasing")
        bin_hz = np.arange(self.fft_size // 2 + 1) * self.sample_rate / self.fft_size
        w = np.zeros((self.n_filters, len(bin_hz)))
        for j in range(self.n_filters):
            left, center, right = self.edges[j], self.edges[j + 1], self.edges[j + 2]
            rising = (bin_hz - left) / (center - left)
            falling = (right - bin_hz) / (right - center)
            w[j] = np.maximum(0.0, np.minimum(rising, falling))
        self.weights = w

    @property
    def center_freqs(self) -> np.ndarray:
        return self.edges[1:-1]


def mel_spectrogram(samples, fb: MelFilterbank | None = None) -> FeatureMatrix:
    """Log mel-spectrogram, frames x n_filters, floored at log(1e-10)."""
    fb = fb or MelFilterbank()
    power = stft_power(samples)
    mel = power.data @ fb.weights.T
    return FeatureMatrix(np.log(np.maximum(mel, LOG_FLOOR)))


def stack_frames(fm: FeatureMatrix, k: int = 3) -> FeatureMatrix:
    """Concatenate non-overlapping groups of k frames (stride k).

    A ragged final group is padded by repeating the last frame, so the
    output always has ceil(frames/k) rows of k*dims features.
    """
    if fm.frames < 1:
        raise ValueError("need at least one frame")
    n_out = -(-fm.frames // k)
    pad = n_out * k - fm.frames
    data = fm.data
    if pad:
        data = np.vstack([data, np.repeat(data[-1:], pad, axis=0)])
    stacked = data.reshape(n_out, k * fm.dims)
    return FeatureMatrix(stacked, frame_shift=fm.frame_shift * k)


def unstack_frames(fm: FeatureMatrix, k: int = 3) -> FeatureMatrix:
    """Inverse of stack_frames for frame counts divisible by k."""
    return FeatureMatrix(fm.data.reshape(fm.frames * k, fm.dims // k),
                         frame_shift=fm.frame_shift / k)


def dct_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Orthonormal DCT-II matrix (n_out x n_in)."""
    k = np.arange(n_out)[:, None]
    i = np.arange(n_in)[None, :]
    m = np.cos(np.pi * k * (2 * i + 1) / (2 * n_in)) * np.sqrt(2.0 / n_in)
    m[0] /= np.sqrt(2.0)
    return m


def mfcc(samples, n: int = 13, fb: MelFilterbank | None = None) -> FeatureMatrix:
    """First n orthonormal DCT-II coefficients of the log-mel frames."""
    logmel = mel_spectrogram(samples, fb)
    return FeatureMatrix(logmel.data @ dct_matrix(logmel.dims, n).T,
                         frame_shift=logmel.frame_shift)


# ---------------------------------------------------------------------------
# Reduced functional acoustic features

LLD_NAMES = (["log_energy", "zcr", "spectral_centroid", "spectral_rolloff85",
              "f0", "voicing"] + [f"mfcc{i}" for i in range(1, 14)])
FUNCTIONAL_NAMES = ("mean", "std", "min", "max", "range", "p25", "p75")
N_FUNCTIONAL_FEATURES = len(LLD_NAMES) * len(FUNCTIONAL_NAMES)  # 133

_F0_MIN_LAG = SAMPLE_RATE // 500   # 500 Hz ceiling
_F0_MAX_LAG = SAMPLE_RATE // 50    # 50 Hz floor


def _lld_tracks(samples) -> np.ndarray:
    """Per-frame low-level descriptors, frames x 19, in LLD_NAMES order."""
    raw = _frame_signal(np.asarray(samples))
    n_frames = raw.shape[0]
    power = stft_power(samples).data
    bin_hz = np.arange(N_BINS) * SAMPLE_RATE / FFT_SIZE

    log_energy = np.log(np.maximum((raw ** 2).sum(axis=1), LOG_FLOOR))
    zcr = (np.abs(np.diff(np.sign(raw), axis=1)) > 0).mean(axis=1)

    total = power.sum(axis=1)
    safe = np.maximum(total, LOG_FLOOR)
    centroid = (power * bin_hz).sum(axis=1) / safe
    cum = np.cumsum(power, axis=1)
    rolloff = bin_hz[np.argmax(cum >= 0.85 * safe[:, None], axis=1)]

    f0 = np.zeros(n_frames)
    voicing = np.zeros(n_frames)
    for i in range(n_frames):
        frame = raw[i]
        r0 = float(frame @ frame)
        if r0 <= LOG_FLOOR:
            continue
        max_lag = min(_F0_MAX_LAG, len(frame) - 1)
        acorr = np.array([frame[:-lag] @ frame[lag:]
                          for lag in range(_F0_MIN_LAG, max_lag + 1)])
        best = int(np.argmax(acorr))
        f0[i] = SAMPLE_RATE / (_F0_MIN_LAG + best)
        voicing[i] = float(np.clip(acorr[best] / r0, 0.0, 1.0))

    ceps = mfcc(samples).data
    return np.column_stack([log_energy, zcr, centroid, rolloff, f0, voicing, ceps])


def acoustic_functionals(samples) -> np.ndarray:
    """Fixed-length 133-dim vector: 19 LLD tracks x 7 functionals.

    Layout: for each LLD in LLD_NAMES order, the 7 functionals in
    FUNCTIONAL_NAMES order (mean, std, min, max, range, p25, p75).
    """
    tracks = _lld_tracks(samples)
    out = np.empty(N_FUNCTIONAL_FEATURES)
    for j in range(tracks.shape[1]):
        t = tracks[:, j]
        lo, hi = t.min(), t.max()
        out[7 * j: 7 * (j + 1)] = (t.mean(), t.std(), lo, hi, hi - lo,
                                   np.percentile(t, 25), np.percentile(t, 75))
    return out


# ---------------------------------------------------------------------------
# Standardization

STD_FLOOR = 1e-8


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features) -> "Standardizer":
        """Per-dimension statistics over a list of FeatureMatrix/arrays."""
        mats = [f.data if isinstance(f, FeatureMatrix) else np.asarray(f, dtype=np.float64)
                for f in features]
        mats = [m if m.ndim == 2 else m[None, :] for m in mats]
        if not mats:
            raise ValueError("cannot fit a standardizer on an empty set")
        stacked = np.vstack(mats)
        return cls(stacked.mean(axis=0), np.maximum(stacked.std(axis=0), STD_FLOOR))

    def apply(self, fm):
        arr = fm.data if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=np.float64)
        if arr.shape[-1] != len(self.mean):
            raise ValueError(
                f"dimension mismatch: {arr.shape[-1]} vs {len(self.mean)}")
        out = (arr - self.mean) / self.std
        return FeatureMatrix(out, frame_shift=fm.frame_shift) if isinstance(fm, FeatureMatrix) else out


# ---------------------------------------------------------------------------
# Feature cache files: magic "SSKF", version, frames, dims, frame_shift,
# then float32 little-endian row-major data.

_HEADER = struct.Struct("<4sIIId")


def save_features(path, fm: FeatureMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, fm.frames, fm.dims,
                              fm.frame_shift))
        fh.write(fm.data.astype("<f4").tobytes())


def load_features(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        magic, version, frames, dims, frame_shift = _HEADER.unpack(
            fh.read(_HEADER.size))
        if magic != CACHE_MAGIC:
            raise ValueError(f"{path}: not a feature cache file")
        if version != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        data = np.frombuffer(fh.read(frames * dims * 4), dtype="<f4")
    return FeatureMatrix(data.reshape(frames, dims).astype(np.float64), frame_shift)
