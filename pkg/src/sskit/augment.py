"""Training-time waveform perturbations: tempo, gain, additive noise and
vocal-tract-length perturbation (VTLP).

Tempo is plain linear-interpolation resampling, so pitch shifts with it;
NSR is an rms amplitude ratio; VTLP warps the mel filterbank rather than
the waveform.  Fixed composition order: tempo -> gain -> noise.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .audio_frontend import MelFilterbank

VTLP_KNEE_HZ = 4800.0


@dataclass
class AugmentPolicy:
    tempo_range: tuple[float, float] = (0.85, 1.20)
    gain_range_db: tuple[float, float] = (-6.0, 5.0)
    nsr_range: tuple[float, float] = (0.1, 0.4)
    vtlp_range: tuple[float, float] = (0.9, 1.1)
    prob: float = 0.4  # per-perturbation application probability
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError("application probability must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"tempo_range": list(self.tempo_range),
                "gain_range_db": list(self.gain_range_db),
                "nsr_range": list(self.nsr_range),
                "vtlp_range": list(self.vtlp_range),
                "prob": self.prob, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentPolicy":
        return cls(tuple(d.get("tempo_range", (0.85, 1.20))),
                   tuple(d.get("gain_range_db", (-6.0, 5.0))),
                   tuple(d.get("nsr_range", (0.1, 0.4))),
                   tuple(d.get("vtlp_range", (0.9, 1.1))),
                   float(d.get("prob", 0.4)), int(d.get("seed", 0)))


def change_tempo(samples, factor: float) -> np.ndarray:
    """Resample so the output lasts 1/factor as long (factor 1.2 = faster)."""
    if factor <= 0:
        raise ValueError(f"tempo factor must be positive, got {factor}")
    x = np.asarray(samples, dtype=np.float64)
    n_out = int(round(len(x) / factor))
    positions = np.arange(n_out) * factor
    return np.interp(positions, np.arange(len(x)), x)


def change_gain(samples, db: float) -> np.ndarray:
    """Scale by 10^(db/20) and clip to [-1, 1]."""
    return np.clip(np.asarray(samples, dtype=np.float64) * 10.0 ** (db / 20.0),
                   -1.0, 1.0)


def mix_noise(samples, noise, nsr: float) -> np.ndarray:
    """Add noise scaled so rms(noise)/rms(signal) = nsr; clip to [-1, 1].

    Noise shorter than the signal is looped; longer noise is trimmed.
    """
    if nsr <= 0:
        raise ValueError(f"noise-to-signal ratio must be positive, got {nsr}")
    x = np.asarray(samples, dtype=np.float64)
    n = np.asarray(noise, dtype=np.float64)
    sig_rms = np.sqrt(np.mean(x ** 2))
    if sig_rms == 0:
        raise ValueError("cannot scale noise against a silent signal")
    if len(n) == 0 or not np.any(n):
        raise ValueError("noise signal is silent")
    reps = -(-len(x) // len(n))
    n = np.tile(n, reps)[:len(x)]
    noise_rms = np.sqrt(np.mean(n ** 2))
    if noise_rms == 0:
        raise ValueError("noise segment is silent after trimming")
    return np.clip(x + n * (nsr * sig_rms / noise_rms), -1.0, 1.0)


def vtlp(fb: MelFilterbank, alpha: float) -> MelFilterbank:
    """Warp the filterbank's breakpoint frequencies by alpha.

    Piecewise-linear warp: f -> alpha*f below the 4,800 Hz knee, then
    linear up to Nyquist so the top edge stays fixed.
    """
    if not 0.8 <= alpha <= 1.2:
        raise ValueError(f"vtlp alpha outside [0.8, 1.2]: {alpha}")
    nyquist = fb.sample_rate / 2.0
    knee = VTLP_KNEE_HZ

    def warp(f):
        f = np.asarray(f, dtype=np.float64)
        below = alpha * f
        above = alpha * knee + (f - knee) * (nyquist - alpha * knee) / (nyquist - knee)
        return np.where(f <= knee, below, above)

    return MelFilterbank(n_filters=fb.n_filters, fft_size=fb.fft_size,
                         sample_rate=fb.sample_rate, edges=warp(fb.edges))


def derived_rng(utterance_id: str, epoch: int, seed: int) -> np.random.Generator:
    """Deterministic per-(utterance, epoch) RNG derived from the policy seed."""
    digest = hashlib.sha256(f"{utterance_id}|{epoch}|{seed}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def draw_vtlp_alpha(policy: AugmentPolicy, utterance_id: str, epoch: int) -> float:
    """VTLP factor for an utterance (1.0 when the draw does not fire)."""
    rng = derived_rng(utterance_id + "#vtlp", epoch, policy.seed)
    if rng.random() < policy.prob:
        return float(rng.uniform(*policy.vtlp_range))
    return 1.0


def random_augment(utterance, policy: AugmentPolicy, rng=None, *,
                   epoch: int = 0, noise_bank=None) -> np.ndarray:
    """Apply tempo, gain and noise independently, each with policy.prob.

    Fully determined by (utterance id, epoch, policy.seed) when no rng is
    passed.  `noise_bank` is a sequence of noise waveforms; noise mixing
    is skipped when it is empty.
    """
    if rng is None:
        rng = derived_rng(utterance.id, epoch, policy.seed)
    samples = np.asarray(utterance.samples, dtype=np.float64)
    if rng.random() < policy.prob:
        samples = change_tempo(samples, float(rng.uniform(*policy.tempo_range)))
    if rng.random() < policy.prob:
        samples = change_gain(samples, float(rng.uniform(*policy.gain_range_db)))
    take_noise = rng.random() < policy.prob
    if take_noise and noise_bank:
        noise = noise_bank[int(rng.integers(len(noise_bank)))]
        samples = mix_noise(samples, noise, float(rng.uniform(*policy.nsr_range)))
    return samples
