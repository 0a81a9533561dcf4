import numpy as np
import pytest

from sskit.asr_pipeline import (AsrBundle, AsrConfig, _pad_batch,
                                decode_corpus, featurize,
                                ingest_external_hypotheses, read_hypotheses,
                                train_asr, write_hypotheses)
from sskit.audio_frontend import MelFilterbank
from sskit.corpus import Utterance
from sskit.synth import make_tone_corpus, synth_tone_utterance


@pytest.fixture(scope="module")
def tiny_run():
    """A fast deterministic training run shared across tests."""
    utts = make_tone_corpus(6, seed=1, n_words=(1, 1), word_len=(1, 2))
    config = AsrConfig(hidden=8, n_layers=2, batch_size=3, max_epochs=3, seed=0)
    bundle, train_log = train_asr(config, utts, utts)
    return utts, config, bundle, train_log


def test_config_validation():
    with pytest.raises(ValueError):
        AsrConfig(hidden=0)
    with pytest.raises(ValueError):
        AsrConfig(anneal=1.0)
    config = AsrConfig.from_dict({"hidden": 16, "unknown_key": 1})
    assert config.hidden == 16


def test_pad_batch_repeats_last_frame():
    a = np.arange(6.0).reshape(3, 2)
    b = np.arange(2.0).reshape(1, 2)
    batch, lengths = _pad_batch([a, b])
    assert batch.shape == (3, 2, 2)
    assert lengths == [3, 1]
    assert np.array_equal(batch[:, 0], a)
    assert np.array_equal(batch[1, 1], b[0])  # padded with the last frame
    assert np.array_equal(batch[2, 1], b[0])


def test_featurize_shape():
    samples = np.sin(2 * np.pi * 440 * np.arange(16000) / 16000)
    fm = featurize(samples, MelFilterbank(), stack=3)
    assert fm.data.shape == (33, 120)


def test_train_log_and_lr_schedule(tiny_run):
    utts, config, _, train_log = tiny_run
    assert len(train_log.rows) == 3
    for row in train_log.rows:
        assert row["lr"] == pytest.approx(
            config.lr / config.anneal ** (row["epoch"] - 1))
    csv_text = train_log.to_csv()
    assert csv_text.splitlines()[0].startswith("epoch,train_loss")
    assert len(csv_text.splitlines()) == 4


def test_first_epoch_is_duration_sorted(tiny_run):
    utts, _, _, train_log = tiny_run
    durations = {u.id: u.duration for u in utts}
    trace = [durations[i] for i in train_log.first_epoch_order]
    assert sorted(trace) == trace
    assert set(train_log.first_epoch_order) == {u.id for u in utts}


def test_decode_deterministic_and_bundle_round_trip(tiny_run, tmp_path):
    utts, _, bundle, _ = tiny_run
    rows1 = decode_corpus(bundle, utts)
    rows2 = decode_corpus(bundle, utts)
    assert rows1 == rows2
    assert all(set(r) == {"id", "text", "mean_frame_entropy"} for r in rows1)

    path = tmp_path / "asr.sskm"
    bundle.save(path)
    loaded = AsrBundle.load(path)
    assert decode_corpus(loaded, utts) == rows1


def test_duration_filter():
    short = synth_tone_utterance("ab", uid="short")
    long_utt = Utterance(id="long", audio_path="", reference_text="a",
                         _samples=np.zeros(16000 * 3))
    config = AsrConfig(hidden=4, n_layers=1, max_epochs=1,
                       max_utt_seconds=1.5)
    _, train_log = train_asr(config, [short, long_utt], [short])
    assert train_log.first_epoch_order == ["short"]
    with pytest.raises(ValueError, match="duration filter"):
        train_asr(config, [long_utt], [short])
    with pytest.raises(ValueError, match="empty"):
        train_asr(config, [short], [])


def test_hypotheses_round_trip(tmp_path):
    rows = [{"id": "u1", "text": "hi there", "mean_frame_entropy": 0.4},
            {"id": "u2", "text": "", "mean_frame_entropy": 1.2}]
    path = tmp_path / "hyps.jsonl"
    write_hypotheses(path, rows)
    mapping = read_hypotheses(path)
    assert mapping == {"u1": "hi there", "u2": ""}

    write_hypotheses(path, [{"id": "u1", "text": "a"}, {"id": "u1", "text": "b"}])
    with pytest.raises(ValueError, match="duplicate id"):
        read_hypotheses(path)


def test_ingest_external_hypotheses(tmp_path):
    utts = [Utterance(id="u1", audio_path=""), Utterance(id="u2", audio_path="")]
    path = tmp_path / "hyps.jsonl"
    write_hypotheses(path, [{"id": "u1", "text": "hello"}])
    missing = ingest_external_hypotheses(utts, "google", path)
    assert missing == 1
    assert utts[0].hypotheses["google"] == "hello"
    assert utts[1].hypotheses["google"] == ""

    write_hypotheses(path, [{"id": "stranger", "text": "x"}])
    with pytest.raises(ValueError, match="unknown ids"):
        ingest_external_hypotheses(utts, "google", path)
