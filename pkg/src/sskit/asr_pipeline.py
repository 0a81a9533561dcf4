"""ASR training and decoding orchestration.

Training follows the SortaGrad curriculum (epoch 1 in ascending duration
order), anneals the learning rate by 1/1.1 per epoch, and keeps the
checkpoint with the best validation WER (ties go to the earliest epoch).
Batches are packed time-major with last-frame repetition padding; the CTC
loss and its gradient are masked to each utterance's true length.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import random
import time
from dataclasses import dataclass, field

import numpy as np

from . import augment as aug
from . import corpus as corpus_mod
from .audio_frontend import (FeatureMatrix, MelFilterbank, Standardizer,
                             mel_spectrogram, stack_frames)
from .checkpoint import load_checkpoint, save_checkpoint
from .ctc import (Alphabet, TargetUnreachableError, ctc_loss_grad,
                  greedy_decode, mean_frame_entropy, postprocess_capitals)
from .eval_report import cer, wer
from .nn_core import (BiLSTM, Dense, NonFiniteError, SeqBatchNorm, SgdNesterov,
                      log_softmax)

log = logging.getLogger(__name__)


@dataclass
class AsrConfig:
    hidden: int = 64
    n_layers: int = 2          # paper-scale descriptor: 5
    batch_size: int = 8        # paper: 24
    lr: float = 1e-4
    momentum: float = 0.9
    clip_norm: float = 400.0
    anneal: float = 1.1
    max_epochs: int = 200
    max_utt_seconds: float = 15.0
    stack: int = 3
    seed: int = 0
    stop_valid_cer: float | None = None  # early stop once validation CER is this low
    # Multiplier on the batch-summed CTC loss.  At corpus scale the summed
    # loss saturates the gradient clip and the effective update is the
    # clip-normalized direction times lr; desk-sized batches need this
    # factor to reach the same regime.
    loss_scale: float = 100.0

    def __post_init__(self):
        if self.hidden <= 0 or self.n_layers <= 0 or self.batch_size <= 0:
            raise ValueError("sizes must be positive")
        if self.anneal <= 1.0:
            raise ValueError("anneal factor must exceed 1")

    def to_dict(self) -> dict:
        return {k: v for k, v in vars(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "AsrConfig":
        return cls(**{k: d[k] for k in d if k in cls.__dataclass_fields__})


@dataclass
class TrainLog:
    rows: list[dict] = field(default_factory=list)
    first_epoch_order: list[str] = field(default_factory=list)  # SortaGrad audit

    def add(self, **row):
        self.rows.append(row)

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(self.rows[0]))
        w.writeheader()
        w.writerows(self.rows)
        return buf.getvalue()


class AsrModel:
    """Stack of bi-LSTMs with batch norm in between, plus a softmax head."""

    def __init__(self, input_dim: int, config: AsrConfig,
                 alphabet: Alphabet, rng):
        self.input_dim = input_dim
        self.config = config
        self.alphabet = alphabet
        self.bilstms = []
        self.bns = []
        for l in range(config.n_layers):
            n_in = input_dim if l == 0 else 2 * config.hidden
            if l > 0:
                self.bns.append(SeqBatchNorm(n_in, name=f"bn{l}"))
            self.bilstms.append(BiLSTM(n_in, config.hidden, rng, name=f"bilstm{l}"))
        self.out = Dense(2 * config.hidden, alphabet.size, rng, name="out")

    def params(self):
        ps = []
        for layer in self.bilstms:
            ps += layer.params()
        for bn in self.bns:
            ps += bn.params()
        ps += self.out.params()
        return ps

    def forward(self, xs: np.ndarray, mode: str = "train") -> np.ndarray:
        """xs [T, B, D] -> logits [T, B, S]."""
        h = xs
        for l, layer in enumerate(self.bilstms):
            if l > 0:
                T, B, D = h.shape
                h = self.bns[l - 1].forward(h.reshape(T * B, D), mode).reshape(T, B, D)
            h = layer.forward(h)
        self._head_shape = h.shape
        return self.out.forward(h)

    def backward(self, dlogits: np.ndarray) -> None:
        d = self.out.backward(dlogits)
        for l in range(len(self.bilstms) - 1, -1, -1):
            d = self.bilstms[l].backward(d)
            if l > 0:
                T, B, D = d.shape
                d = self.bns[l - 1].backward(d.reshape(T * B, D)).reshape(T, B, D)

    def state_tensors(self) -> dict:
        tensors = {p.name: p.values.copy() for p in self.params()}
        for bn in self.bns:
            tensors[f"{bn.gamma.name}.running_mean"] = bn.running_mean.copy()
            tensors[f"{bn.gamma.name}.running_var"] = bn.running_var.copy()
        return tensors

    def load_state_tensors(self, tensors: dict) -> None:
        for p in self.params():
            p.values[...] = tensors[p.name]
        for bn in self.bns:
            bn.running_mean = tensors[f"{bn.gamma.name}.running_mean"].copy()
            bn.running_var = tensors[f"{bn.gamma.name}.running_var"].copy()


@dataclass
class AsrBundle:
    """Everything needed to decode: model, feature statistics, alphabet."""
    model: AsrModel
    standardizer: Standardizer
    filterbank: MelFilterbank
    config: AsrConfig

    def save(self, path) -> None:
        desc = {
            "type": "asr",
            "config": self.config.to_dict(),
            "alphabet": list(self.model.alphabet.symbols),
            "input_dim": self.model.input_dim,
        }
        tensors = self.model.state_tensors()
        tensors["standardizer.mean"] = self.standardizer.mean
        tensors["standardizer.std"] = self.standardizer.std
        tensors["filterbank.edges"] = self.filterbank.edges
        save_checkpoint(path, desc, tensors)

    @classmethod
    def load(cls, path) -> "AsrBundle":
        desc, tensors = load_checkpoint(path)
        if desc.get("type") != "asr":
            raise ValueError(f"{path}: not an ASR checkpoint")
        config = AsrConfig.from_dict(desc["config"])
        alphabet = Alphabet(tuple(desc["alphabet"]))
        model = AsrModel(desc["input_dim"], config, alphabet,
                         np.random.default_rng(0))
        model.load_state_tensors(tensors)
        std = Standardizer(tensors["standardizer.mean"], tensors["standardizer.std"])
        fb = MelFilterbank(edges=tensors["filterbank.edges"])
        return cls(model, std, fb, config)


def featurize(samples, fb: MelFilterbank, standardizer: Standardizer | None = None,
              stack: int = 3) -> FeatureMatrix:
    """Waveform -> stacked (and optionally standardized) log-mel features."""
    fm = stack_frames(mel_spectrogram(samples, fb), stack)
    return standardizer.apply(fm) if standardizer is not None else fm


def _pad_batch(seqs) -> tuple[np.ndarray, list[int]]:
    """Pack [T_i, D] arrays into [T_max, B, D], repeating the last frame."""
    lengths = [s.shape[0] for s in seqs]
    t_max = max(lengths)
    batch = np.empty((t_max, len(seqs), seqs[0].shape[1]))
    for b, s in enumerate(seqs):
        batch[:len(s), b] = s
        if len(s) < t_max:
            batch[len(s):, b] = s[-1]
    return batch, lengths


def train_asr(config: AsrConfig, train_utts, valid_utts,
              policy: aug.AugmentPolicy | None = None):
    """Train an ASR model; returns (AsrBundle of the best epoch, TrainLog)."""
    alphabet = Alphabet()
    train_utts = [u for u in train_utts if u.duration <= config.max_utt_seconds]
    if not train_utts:
        raise ValueError("no training utterances after the duration filter")
    if not valid_utts:
        raise ValueError("validation manifest is empty")

    fb = MelFilterbank()
    base_feats = {u.id: stack_frames(mel_spectrogram(u.samples, fb), config.stack)
                  for u in train_utts}
    standardizer = Standardizer.fit(list(base_feats.values()))

    targets = {u.id: corpus_mod.encode_target(
        corpus_mod.normalize_transcript(u.reference_text), alphabet)
        for u in train_utts}

    rng = np.random.default_rng(config.seed)
    model = AsrModel(base_feats[train_utts[0].id].dims, config, alphabet, rng)
    opt = SgdNesterov(config.lr, config.momentum, config.clip_norm)
    shuffler = random.Random(config.seed)

    train_log = TrainLog()
    best = {"wer": np.inf, "epoch": None, "state": None}
    bundle = AsrBundle(model, standardizer, fb, config)

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.time()
        lr = config.lr / config.anneal ** (epoch - 1)
        opt.lr = lr
        if epoch == 1:
            order = sorted(train_utts, key=lambda u: (u.duration, u.id))  # SortaGrad
            train_log.first_epoch_order = [u.id for u in order]
        else:
            order = list(train_utts)
            shuffler.shuffle(order)

        epoch_loss, n_scored = 0.0, 0
        diverged = False
        for start in range(0, len(order), config.batch_size):
            chunk = order[start:start + config.batch_size]
            feats = []
            for u in chunk:
                if policy is not None:
                    samples = aug.random_augment(u, policy, epoch=epoch)
                    alpha = aug.draw_vtlp_alpha(policy, u.id, epoch)
                    warped = aug.vtlp(fb, alpha) if alpha != 1.0 else fb
                    fm = stack_frames(mel_spectrogram(samples, warped), config.stack)
                    feats.append(standardizer.apply(fm).data)
                else:
                    feats.append(standardizer.apply(base_feats[u.id]).data)
            batch, lengths = _pad_batch(feats)
            try:
                logits = model.forward(batch, mode="train")
            except NonFiniteError:
                diverged = True
                break
            dlogits = np.zeros_like(logits)
            batch_loss = 0.0
            scored = 0
            for b, u in enumerate(chunk):
                lat = log_softmax(logits[:lengths[b], b])
                try:
                    loss, grad = ctc_loss_grad(lat, targets[u.id], alphabet.blank)
                except TargetUnreachableError:
                    log.warning("skipping %s: target unreachable in %d frames",
                                u.id, lengths[b])
                    continue
                batch_loss += loss
                scored += 1
                dlogits[:lengths[b], b] = grad
            if scored == 0:
                continue
            # gradients are summed over the batch (not averaged) and scaled;
            # the clip threshold bounds the resulting update
            dlogits *= config.loss_scale
            batch_loss /= scored
            if not np.isfinite(batch_loss):
                diverged = True
                break
            model.backward(dlogits)
            opt.step(model.params())
            epoch_loss += batch_loss * scored
            n_scored += scored

        if diverged:
            log.error("training diverged at epoch %d; keeping best checkpoint", epoch)
            break

        valid_wer, valid_cer = _score_corpus(bundle, valid_utts)
        train_log.add(epoch=epoch, train_loss=round(epoch_loss / max(n_scored, 1), 6),
                      valid_wer=round(valid_wer, 6), valid_cer=round(valid_cer, 6),
                      lr=lr, wall_time=round(time.time() - t0, 3))
        if valid_wer < best["wer"]:
            best = {"wer": valid_wer, "epoch": epoch, "state": model.state_tensors()}
        if config.stop_valid_cer is not None and valid_cer < config.stop_valid_cer:
            break

    if best["state"] is not None:
        model.load_state_tensors(best["state"])
    return bundle, train_log


def _score_corpus(bundle: AsrBundle, utts) -> tuple[float, float]:
    wers, cers = [], []
    for u in utts:
        hyp = decode_utterance(bundle, u.samples)["text"]
        ref = corpus_mod.normalize_transcript(u.reference_text)
        wers.append(wer(ref, hyp))
        cers.append(cer(ref, hyp))
    return float(np.mean(wers)), float(np.mean(cers))


def decode_utterance(bundle: AsrBundle, samples) -> dict:
    fm = featurize(samples, bundle.filterbank, bundle.standardizer,
                   bundle.config.stack)
    if fm.dims != bundle.model.input_dim:
        raise ValueError(f"feature dim {fm.dims} does not match model "
                         f"input dim {bundle.model.input_dim}")
    logits = bundle.model.forward(fm.data[:, None, :], mode="eval")[:, 0]
    lat = log_softmax(logits)
    raw = greedy_decode(lat, bundle.model.alphabet)
    return {"text": postprocess_capitals(raw),
            "mean_frame_entropy": mean_frame_entropy(lat)}


def decode_corpus(bundle: AsrBundle, utterances) -> list[dict]:
    """Greedy-decode every utterance; deterministic, ordered by input."""
    rows = []
    for u in utterances:
        d = decode_utterance(bundle, u.samples)
        rows.append({"id": u.id, "text": d["text"],
                     "mean_frame_entropy": d["mean_frame_entropy"]})
    return rows


def write_hypotheses(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_hypotheses(path) -> dict[str, str]:
    """Read a JSON-lines id -> text mapping; duplicate ids are an error."""
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec["id"] in mapping:
                raise ValueError(f"{path}:{lineno}: duplicate id {rec['id']!r}")
            mapping[str(rec["id"])] = str(rec["text"])
    return mapping


def ingest_external_hypotheses(utterances, source_name: str, path) -> int:
    """Attach hypotheses from a file to utterances under `source_name`.

    Unknown ids in the file are an error; utterances missing from the file
    get an empty hypothesis.  Returns the number of missing ids.
    """
    mapping = read_hypotheses(path)
    known = {u.id for u in utterances}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ValueError(f"hypothesis file contains unknown ids: {unknown}")
    missing = 0
    for u in utterances:
        if u.id in mapping:
            u.hypotheses[source_name] = mapping[u.id]
        else:
            u.hypotheses[source_name] = ""
            missing += 1
    if missing:
        log.warning("%d utterances had no hypothesis for source %r",
                    missing, source_name)
    return missing
