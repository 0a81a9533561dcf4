"""Corpus handling: manifests, WAV ingestion, labels, targets and splits.

Manifests are JSON-lines, one utterance per row with fields
{id, audio_path, text, scores, speaker, hypotheses}.  Audio must already
be PCM16 mono 16 kHz; there is no silent resampling.
"""

from __future__ import annotations

import json
import logging
import random
import re
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ctc import Alphabet

log = logging.getLogger(__name__)

SAMPLE_RATE = 16000

NEGATIVE = "negative"
POSITIVE = "positive"

_ALLOWED = re.compile(r"[^a-z' ]")


class ManifestError(ValueError):
    """Malformed or inconsistent manifest content."""


class UnsupportedFormatError(ValueError):
    """WAV file is not PCM16 mono 16 kHz."""


@dataclass
class Utterance:
    id: str
    audio_path: str
    reference_text: str = ""
    sentiment_scores: list[float] = field(default_factory=list)
    speaker_id: str = ""
    hypotheses: dict[str, str] = field(default_factory=dict)
    sample_rate: int = SAMPLE_RATE
    _samples: np.ndarray | None = None

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            self._samples, sr = read_wav(self.audio_path)
            self.sample_rate = sr
        return self._samples

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def label(self) -> str:
        return binarize_sentiment(self.sentiment_scores)


@dataclass
class SplitSpec:
    train_ids: set[str]
    valid_ids: set[str]
    test_ids: set[str]
    speaker_independent: bool = False

    def __post_init__(self):
        pairs = [(self.train_ids, self.valid_ids),
                 (self.train_ids, self.test_ids),
                 (self.valid_ids, self.test_ids)]
        if any(a & b for a, b in pairs):
            raise ValueError("split sets must be pairwise disjoint")

    def to_json(self) -> str:
        return json.dumps({"train": sorted(self.train_ids),
                           "valid": sorted(self.valid_ids),
                           "test": sorted(self.test_ids),
                           "speaker_independent": self.speaker_independent}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplitSpec":
        d = json.loads(text)
        return cls(set(d["train"]), set(d["valid"]), set(d["test"]),
                   bool(d.get("speaker_independent", False)))


def load_manifest(path) -> list[Utterance]:
    """Read a JSON-lines manifest; validates required fields and unique ids."""
    utterances = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({e})") from None
            for req in ("id", "audio_path"):
                if req not in rec:
                    raise ManifestError(f"{path}:{lineno}: missing field {req!r}")
            if rec["id"] in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate id {rec['id']!r}")
            seen.add(rec["id"])
            scores = rec.get("scores", [])
            if any(not (-3.0 <= s <= 3.0) for s in scores):
                raise ManifestError(
                    f"{path}:{lineno}: sentiment score outside [-3, 3]")
            utterances.append(Utterance(
                id=str(rec["id"]),
                audio_path=str(rec["audio_path"]),
                reference_text=rec.get("text", ""),
                sentiment_scores=[float(s) for s in scores],
                speaker_id=str(rec.get("speaker", "")),
                hypotheses={str(k): str(v) for k, v in rec.get("hypotheses", {}).items()},
            ))
    return utterances


def save_manifest(utterances, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u in utterances:
            fh.write(json.dumps({
                "id": u.id, "audio_path": u.audio_path, "text": u.reference_text,
                "scores": u.sentiment_scores, "speaker": u.speaker_id,
                "hypotheses": u.hypotheses}) + "\n")


def read_wav(path) -> tuple[np.ndarray, int]:
    """Load a PCM16 mono 16 kHz WAV, scaling samples to [-1, 1] by 1/32768."""
    with wave.open(str(path), "rb") as wf:
        if wf.getcomptype() != "NONE" or wf.getsampwidth() != 2:
            raise UnsupportedFormatError(f"{path}: expected uncompressed PCM16")
        if wf.getnchannels() != 1:
            raise UnsupportedFormatError(
                f"{path}: expected mono, got {wf.getnchannels()} channels")
        if wf.getframerate() != SAMPLE_RATE:
            raise UnsupportedFormatError(
                f"{path}: expected {SAMPLE_RATE} Hz, got {wf.getframerate()}")
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, SAMPLE_RATE


def write_wav(path, samples, sample_rate: int = SAMPLE_RATE) -> None:
    """Write [-1, 1] samples as PCM16 mono; inverse of read_wav up to rounding."""
    ints = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(ints.tobytes())


def binarize_sentiment(scores) -> str:
    """Positive iff mean(scores) > 0; an exact zero mean counts as positive."""
    if not scores:
        raise ValueError("cannot binarize an empty score list")
    mean = sum(scores) / len(scores)
    if mean == 0.0:
        log.warning("sentiment scores average to exactly 0; labelling positive")
        return POSITIVE
    return POSITIVE if mean > 0 else NEGATIVE


def normalize_transcript(text: str) -> str:
    """Lowercase, keep only a-z / apostrophe / space, collapse whitespace."""
    lowered = text.lower().replace("-", " ")
    cleaned = _ALLOWED.sub("", " ".join(lowered.split()))
    return " ".join(cleaned.split())


def encode_target(text: str, alphabet: Alphabet | None = None) -> list[int]:
    """Encode a normalized transcript as CTC target symbols.

    Spaces are dropped and each word-initial letter becomes its capital
    symbol ("hi how are you" -> "HiHowAreYou"); apostrophes pass through.
    Inverse of ctc.postprocess_capitals up to whitespace normalization.
    """
    alphabet = alphabet or Alphabet()
    out = []
    for word in text.split():
        for i, ch in enumerate(word):
            if i == 0 and ch.isalpha():
                ch = ch.upper()
            try:
                out.append(alphabet.index(ch))
            except KeyError:
                raise ValueError(f"character {ch!r} outside alphabet") from None
    return out


def make_split(utterances, ratios, speaker_independent: bool, seed: int) -> SplitSpec:
    """Deterministic train/valid/test split.

    With speaker_independent, whole speaker groups are assigned greedily
    (largest group first) to the split with the largest remaining deficit,
    so no speaker straddles sets.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    if len(ratios) != 3:
        raise ValueError("expected (train, valid, test) ratios")
    rng = random.Random(seed)
    total = len(utterances)
    targets = [r * total for r in ratios]
    assigned: list[set[str]] = [set(), set(), set()]

    if speaker_independent:
        groups: dict[str, list[str]] = {}
        for u in utterances:
            groups.setdefault(u.speaker_id, []).append(u.id)
        if len(groups) < 2:
            raise ValueError("speaker-independent split needs at least 2 speakers")
        order = sorted(groups, key=lambda s: (-len(groups[s]), s))
        rng.shuffle(order)
        order.sort(key=lambda s: -len(groups[s]))  # stable: ties broken by shuffle
        for spk in order:
            deficits = [targets[i] - len(assigned[i]) for i in range(3)]
            assigned[deficits.index(max(deficits))].update(groups[spk])
    else:
        ids = sorted(u.id for u in utterances)
        rng.shuffle(ids)
        n_train = round(targets[0])
        n_valid = round(targets[1])
        assigned[0] = set(ids[:n_train])
        assigned[1] = set(ids[n_train:n_train + n_valid])
        assigned[2] = set(ids[n_train + n_valid:])

    return SplitSpec(assigned[0], assigned[1], assigned[2], speaker_independent)
