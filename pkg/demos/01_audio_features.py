"""Walk through the acoustic frontend on a synthetic tone utterance.

Run with: python demos/01_audio_features.py
"""

import numpy as np

from sskit.audio_frontend import (MelFilterbank, acoustic_functionals, fft,
                                  mel_spectrogram, mfcc, naive_dft,
                                  stack_frames)
from sskit.synth import synth_tone_utterance

# A "sentence" where each letter is a pure tone; one second is 98 frames
# under the 25 ms window / 10 ms hop analysis.
utt = synth_tone_utterance("abc de", uid="demo")
samples = utt.samples
print(f"utterance {utt.reference_text!r}: {len(samples)} samples "
      f"({utt.duration:.2f}s)")

# The in-module radix-2 FFT is the workhorse; sanity-check it against the
# O(n^2) DFT before trusting anything built on top of it.
x = np.random.default_rng(0).normal(size=512)
print(f"FFT vs naive DFT, n=512: max abs diff "
      f"{np.max(np.abs(fft(x) - naive_dft(x))):.2e}")

fb = MelFilterbank()
mel = mel_spectrogram(samples, fb)
stacked = stack_frames(mel, 3)
print(f"log-mel: {mel.data.shape}, frame shift {mel.frame_shift * 1000:.0f} ms")
print(f"stacked x3: {stacked.data.shape}, "
      f"frame shift {stacked.frame_shift * 1000:.0f} ms")

# Which mel filter lights up for each tone segment?
peak = np.argmax(mel.data, axis=1)
print("per-frame peak filter center (Hz), every 10th frame:")
print(np.round(fb.center_freqs[peak[::10]]))

ceps = mfcc(samples)
print(f"MFCC: {ceps.data.shape}")

vec = acoustic_functionals(samples)
print(f"functional vector for the acoustic sentiment branch: {vec.shape} "
      f"(19 LLDs x 7 functionals)")
