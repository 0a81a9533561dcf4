"""Synthetic desk-scale corpora for experiments, demos and self-checks.

Audio: tone-coded words over a 5-letter alphabet (one sine frequency per
letter, silence between words) so a small model can overfit quickly.
Text: keyword-bearing review-style sentences with a known sentiment
polarity, plus character/word corruption helpers that emulate ASR damage.
"""

from __future__ import annotations

import random
import string

import numpy as np

from .corpus import NEGATIVE, POSITIVE, SAMPLE_RATE, Utterance

TONE_LETTERS = "abcde"
TONE_FREQS = {"a": 300.0, "b": 700.0, "c": 1300.0, "d": 2100.0, "e": 3200.0}
# letters fill most frames and silences stay short, so the CTC target
# occupies a large fraction of the lattice and the all-blank local
# minimum is unattractive even at a small learning rate
LETTER_SECONDS = 0.12
GAP_SECONDS = 0.06
LETTER_GAP_SECONDS = 0.06  # separates repeated letters so CTC can re-emit
EDGE_FADE = 0.005


def tone_for_letter(letter: str, seconds: float = LETTER_SECONDS,
                    amplitude: float = 0.5) -> np.ndarray:
    n = int(seconds * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    wave = amplitude * np.sin(2 * np.pi * TONE_FREQS[letter] * t)
    fade = int(EDGE_FADE * SAMPLE_RATE)
    env = np.ones(n)
    env[:fade] = np.linspace(0, 1, fade)
    env[-fade:] = np.linspace(1, 0, fade)
    return wave * env


def synth_tone_utterance(text: str, uid: str = "synth",
                         speaker: str = "spk0",
                         gap_seconds: float = GAP_SECONDS) -> Utterance:
    """Render a sentence over TONE_LETTERS as audio, in memory."""
    gap = np.zeros(int(gap_seconds * SAMPLE_RATE))
    letter_gap = np.zeros(int(LETTER_GAP_SECONDS * SAMPLE_RATE))
    pieces = [gap.copy()]
    for word in text.split():
        for i, letter in enumerate(word):
            if i:
                pieces.append(letter_gap.copy())
            pieces.append(tone_for_letter(letter))
        pieces.append(gap.copy())
    samples = np.concatenate(pieces)
    return Utterance(id=uid, audio_path="", reference_text=text,
                     speaker_id=speaker, _samples=samples)


def make_tone_corpus(n: int = 20, seed: int = 0,
                     n_words=(1, 3), word_len=(1, 4)) -> list[Utterance]:
    """Deterministic tone-coded corpus; texts are unique where possible."""
    rng = random.Random(seed)
    utts = []
    seen = set()
    while len(utts) < n:
        words = [
            "".join(rng.choice(TONE_LETTERS)
                    for _ in range(rng.randint(*word_len)))
            for _ in range(rng.randint(*n_words))
        ]
        text = " ".join(words)
        if text in seen and len(seen) < 4 ** 4:
            continue
        seen.add(text)
        utts.append(synth_tone_utterance(text, uid=f"tone{len(utts):03d}",
                                         speaker=f"spk{len(utts) % 5}"))
    return utts


# ---------------------------------------------------------------------------
# Sentiment text corpora

POSITIVE_WORDS = ("good", "great", "lovely", "superb", "delight",
                  "charming", "wonderful", "uplifting")
NEGATIVE_WORDS = ("bad", "awful", "boring", "dreadful", "gross",
                  "painful", "terrible", "dismal")
FILLER_WORDS = ("the", "movie", "was", "really", "i", "think", "it", "felt",
                "quite", "film", "story", "acting", "plot", "very", "so",
                "scene", "overall", "and", "this", "one")


def make_sentiment_text(rng: random.Random, label: str) -> str:
    bank = POSITIVE_WORDS if label == POSITIVE else NEGATIVE_WORDS
    n_total = rng.randint(9, 14)
    n_key = rng.randint(3, 5)
    words = [rng.choice(FILLER_WORDS) for _ in range(n_total - n_key)]
    positions = sorted(rng.sample(range(len(words) + 1), min(n_key, len(words) + 1)))
    for offset, pos in enumerate(positions):
        words.insert(pos + offset, rng.choice(bank))
    # end on a sentiment word so the final-state encoder sees it last
    words.append(rng.choice(bank))
    return " ".join(words)


def make_sentiment_corpus(n: int = 400, seed: int = 0):
    """Balanced keyword-bearing corpus as (text, label) pairs."""
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        label = POSITIVE if i % 2 == 0 else NEGATIVE
        rows.append((make_sentiment_text(rng, label), label))
    rng.shuffle(rows)
    return rows


def corrupt_text(text: str, rate: float, rng: random.Random) -> str:
    """Random character substitutions at the given rate; spaces untouched."""
    out = []
    for ch in text:
        if ch != " " and rng.random() < rate:
            out.append(rng.choice(string.ascii_lowercase))
        else:
            out.append(ch)
    return "".join(out)


def corrupt_words(text: str, rate: float, rng: random.Random) -> str:
    """Replace whole words at the given rate, emulating ASR word errors."""
    words = []
    for w in text.split():
        if rng.random() < rate:
            words.append("".join(rng.choice(string.ascii_lowercase)
                                 for _ in range(max(2, len(w)))))
        else:
            words.append(w)
    return " ".join(words)
