import json
import wave

import numpy as np
import pytest

from sskit.corpus import (ManifestError, SplitSpec, UnsupportedFormatError,
                          Utterance, binarize_sentiment, encode_target,
                          load_manifest, make_split, normalize_transcript,
                          read_wav, save_manifest, write_wav)
from sskit.ctc import Alphabet


def write_manifest(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


def test_manifest_round_trip(tmp_path):
    utts = [Utterance(id="u1", audio_path="a.wav", reference_text="hi there",
                      sentiment_scores=[1.0, 2.0], speaker_id="s1",
                      hypotheses={"own": "hi here"}),
            Utterance(id="u2", audio_path="b.wav")]
    path = tmp_path / "m.jsonl"
    save_manifest(utts, path)
    loaded = load_manifest(path)
    assert [u.id for u in loaded] == ["u1", "u2"]
    assert loaded[0].hypotheses == {"own": "hi here"}
    assert loaded[0].sentiment_scores == [1.0, 2.0]


def test_manifest_validation(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest(path, [{"id": "a", "audio_path": "x"},
                          {"id": "a", "audio_path": "y"}])
    with pytest.raises(ManifestError, match="duplicate id"):
        load_manifest(path)

    write_manifest(path, [{"id": "a"}])
    with pytest.raises(ManifestError, match="missing field"):
        load_manifest(path)

    path.write_text("{not json\n")
    with pytest.raises(ManifestError, match="invalid JSON"):
        load_manifest(path)

    write_manifest(path, [{"id": "a", "audio_path": "x", "scores": [4.0]}])
    with pytest.raises(ManifestError, match="outside"):
        load_manifest(path)


def test_wav_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    samples = rng.uniform(-0.9, 0.9, size=1600)
    path = tmp_path / "t.wav"
    write_wav(path, samples)
    loaded, sr = read_wav(path)
    assert sr == 16000
    assert np.max(np.abs(loaded - samples)) < 1.0 / 32768


def test_wav_format_errors(tmp_path):
    path = tmp_path / "bad.wav"
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(2)
        wf.setsampwidth(2)
        wf.setframerate(16000)
        wf.writeframes(b"\x00" * 64)
    with pytest.raises(UnsupportedFormatError, match="mono"):
        read_wav(path)

    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(8000)
        wf.writeframes(b"\x00" * 64)
    with pytest.raises(UnsupportedFormatError, match="16000"):
        read_wav(path)

    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(1)
        wf.setframerate(16000)
        wf.writeframes(b"\x00" * 64)
    with pytest.raises(UnsupportedFormatError, match="PCM16"):
        read_wav(path)


def test_binarize_sentiment():
    assert binarize_sentiment([1.0, 2.0]) == "positive"
    assert binarize_sentiment([-1.0, -0.5]) == "negative"
    assert binarize_sentiment([1.0, -1.0]) == "positive"  # exact zero mean
    with pytest.raises(ValueError):
        binarize_sentiment([])


def test_normalize_transcript():
    assert normalize_transcript("Hello, World!") == "hello world"
    assert normalize_transcript("well-known fact") == "well known fact"
    assert normalize_transcript("don't  stop") == "don't stop"
    assert normalize_transcript("  a\tb\nc  ") == "a b c"
    assert normalize_transcript("123 go") == "go"
    assert normalize_transcript("") == ""


def test_encode_target():
    alphabet = Alphabet()
    ids = encode_target("hi how are you", alphabet)
    assert alphabet.to_string(ids) == "HiHowAreYou"
    assert alphabet.to_string(encode_target("don't", alphabet)) == "Don't"
    with pytest.raises(ValueError, match="outside alphabet"):
        encode_target("café", alphabet)


def make_utts(n, speakers=None):
    return [Utterance(id=f"u{i:04d}", audio_path="",
                      speaker_id=(speakers[i % len(speakers)] if speakers
                                  else f"spk{i}"))
            for i in range(n)]


def test_random_split_exact_sizes():
    utts = make_utts(2198)
    ratios = (1279 / 2198, 233 / 2198, 686 / 2198)
    spec = make_split(utts, ratios, speaker_independent=False, seed=0)
    assert (len(spec.train_ids), len(spec.valid_ids), len(spec.test_ids)) \
        == (1279, 233, 686)
    assert spec.train_ids | spec.valid_ids | spec.test_ids \
        == {u.id for u in utts}


def test_speaker_independent_split():
    utts = make_utts(100, speakers=[f"s{i}" for i in range(10)])
    spec = make_split(utts, (0.6, 0.2, 0.2), speaker_independent=True, seed=1)
    by_speaker = {}
    for u in utts:
        by_speaker.setdefault(u.speaker_id, set()).add(u.id)
    for ids in by_speaker.values():
        # every speaker's utterances land in exactly one split
        assert sum(bool(ids & s) for s in
                   (spec.train_ids, spec.valid_ids, spec.test_ids)) == 1
    assert len(spec.train_ids) == 60


def test_split_validation():
    utts = make_utts(10)
    with pytest.raises(ValueError, match="sum to 1"):
        make_split(utts, (0.5, 0.2, 0.2), False, 0)
    with pytest.raises(ValueError, match="2 speakers"):
        make_split(make_utts(10, speakers=["only"]), (0.8, 0.1, 0.1), True, 0)


def test_split_spec_disjoint_and_json():
    with pytest.raises(ValueError, match="disjoint"):
        SplitSpec({"a"}, {"a"}, set())
    spec = SplitSpec({"a"}, {"b"}, {"c"}, speaker_independent=True)
    again = SplitSpec.from_json(spec.to_json())
    assert again == spec


def test_split_deterministic():
    utts = make_utts(50)
    a = make_split(utts, (0.8, 0.1, 0.1), False, seed=7)
    b = make_split(utts, (0.8, 0.1, 0.1), False, seed=7)
    assert a.train_ids == b.train_ids and a.test_ids == b.test_ids
