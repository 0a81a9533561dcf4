"""Single executable exposing the pipeline as subcommands.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
Every run writes a resolved-config snapshot under --out-dir.  Log level
comes from the SSK_LOG_LEVEL environment variable (default INFO).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import asr_pipeline, augment, corpus, selftest, sentiment
from .audio_frontend import acoustic_functionals, save_features
from .eval_report import EvalReport, UtteranceResult, cer, histogram_csv, wer
from .eval_report import cer_accuracy_histogram

log = logging.getLogger("sskit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def prepare_out_dir(args, resolved: dict) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "resolved_config.json", "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True, default=str)
    return out


def _resolved(args, extra=None) -> dict:
    d = {k: v for k, v in vars(args).items() if k != "func"}
    d.update(extra or {})
    return d


def cmd_featurize(args):
    utts = corpus.load_manifest(args.manifest)
    out = prepare_out_dir(args, _resolved(args))
    fb = asr_pipeline.MelFilterbank()
    for u in utts:
        fm = asr_pipeline.featurize(u.samples, fb)
        save_features(out / f"{u.id}.sskf", fm)
        np.save(out / f"{u.id}.functionals.npy", acoustic_functionals(u.samples))
    log.info("featurized %d utterances into %s", len(utts), out)
    return 0


def cmd_augment_preview(args):
    utts = corpus.load_manifest(args.manifest)
    cfg = load_config(args.config)
    policy = augment.AugmentPolicy.from_dict(cfg.get("augment", {"prob": 1.0}))
    out = prepare_out_dir(args, _resolved(args, {"augment": policy.to_dict()}))
    for u in utts:
        samples = augment.random_augment(u, policy, epoch=args.seed)
        corpus.write_wav(out / f"{u.id}.aug.wav", samples)
    log.info("wrote %d augmented previews to %s", len(utts), out)
    return 0


def cmd_train_asr(args):
    cfg = load_config(args.config)
    asr_cfg = asr_pipeline.AsrConfig.from_dict(cfg.get("asr", {}))
    if args.seed is not None:
        asr_cfg.seed = args.seed
    policy = (augment.AugmentPolicy.from_dict(cfg["augment"])
              if "augment" in cfg else None)
    out = prepare_out_dir(args, _resolved(args, {"asr": asr_cfg.to_dict()}))
    train = corpus.load_manifest(args.train_manifest)
    valid = corpus.load_manifest(args.valid_manifest)
    bundle, train_log = asr_pipeline.train_asr(asr_cfg, train, valid, policy)
    bundle.save(out / "asr.sskm")
    (out / "train_log.csv").write_text(train_log.to_csv())
    log.info("checkpoint written to %s", out / "asr.sskm")
    return 0


def cmd_decode(args):
    bundle = asr_pipeline.AsrBundle.load(args.checkpoint)
    utts = corpus.load_manifest(args.manifest)
    out = prepare_out_dir(args, _resolved(args))
    rows = asr_pipeline.decode_corpus(bundle, utts)
    asr_pipeline.write_hypotheses(out / "hypotheses.jsonl", rows)
    log.info("decoded %d utterances", len(rows))
    return 0


def cmd_ingest_hypotheses(args):
    utts = corpus.load_manifest(args.manifest)
    missing = asr_pipeline.ingest_external_hypotheses(utts, args.source, args.hyps)
    out = prepare_out_dir(args, _resolved(args))
    corpus.save_manifest(utts, out / "manifest.jsonl")
    log.info("ingested hypotheses for source %r (%d missing)", args.source, missing)
    return 0


def cmd_train_lm(args):
    cfg = load_config(args.config).get("sentiment", {})
    utts = corpus.load_manifest(args.manifest)
    texts = [corpus.normalize_transcript(u.reference_text) for u in utts]
    out = prepare_out_dir(args, _resolved(args, {"sentiment": cfg}))
    lm, ppls = sentiment.train_char_lm(
        texts,
        d_hidden=cfg.get("d_hidden", 64), window=cfg.get("window", 64),
        epochs=cfg.get("lm_epochs", 10), lr=cfg.get("lm_lr", 0.5),
        seed=args.seed or 0)
    lm.save(out / "charlm.sskm")
    log.info("final LM perplexity: %.3f", ppls[-1])
    return 0


def _examples_from(utts, text_source: str):
    examples = []
    for u in utts:
        if text_source == "ground_truth":
            text = corpus.normalize_transcript(u.reference_text)
        elif text_source.startswith("asr:"):
            text = corpus.normalize_transcript(
                u.hypotheses.get(text_source[4:], ""))
        else:
            raise ValueError(f"unknown text source {text_source!r}")
        examples.append(sentiment.SentimentExample(
            id=u.id, text=text, label=u.label(), text_source=text_source))
    return examples


def cmd_train_sentiment(args):
    lm = sentiment.CharLM.load(args.lm)
    train = _examples_from(corpus.load_manifest(args.train_manifest),
                           args.text_source)
    valid = _examples_from(corpus.load_manifest(args.valid_manifest),
                           args.text_source)
    out = prepare_out_dir(args, _resolved(args))
    head, val_acc = sentiment.train_text_sentiment(train, valid, lm)
    X_valid = np.stack([lm.encode_text(e.text) for e in valid])
    probs = head.predict_proba(X_valid)
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for e, p in zip(valid, probs):
            fh.write(json.dumps({"id": e.id, "source": args.text_source,
                                 "p_positive": float(p)}) + "\n")
    log.info("validation accuracy %.3f (l2_c=%s)", val_acc, head.l2_c)
    return 0


def _read_predictions(path) -> dict[str, float]:
    preds = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                preds[str(rec["id"])] = float(rec["p_positive"])
    return preds


def cmd_fuse(args):
    preds = [_read_predictions(p) for p in args.predictions]
    utts = corpus.load_manifest(args.manifest)
    labels = {u.id: u.label() for u in utts}
    out = prepare_out_dir(args, _resolved(args))
    weights = sentiment.tune_fusion(preds, labels)
    fused = sentiment.fuse(preds, weights)
    (out / "fusion_weights.json").write_text(weights.to_json())
    with open(out / "fused_predictions.jsonl", "w", encoding="utf-8") as fh:
        for uid, p in fused.items():
            fh.write(json.dumps({"id": uid, "source": "fused",
                                 "p_positive": p}) + "\n")
    log.info("fusion weights: %s", weights.weights)
    return 0


def cmd_evaluate(args):
    refs = {u.id: corpus.normalize_transcript(u.reference_text)
            for u in corpus.load_manifest(args.refs)}
    hyps = asr_pipeline.read_hypotheses(args.hyps)
    out = prepare_out_dir(args, _resolved(args))
    report = EvalReport()
    for uid, ref in refs.items():
        hyp = corpus.normalize_transcript(hyps.get(uid, ""))
        report.rows.append(UtteranceResult(uid, wer(ref, hyp), cer(ref, hyp)))
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    (out / "cer_histogram.csv").write_text(
        histogram_csv(cer_accuracy_histogram(report)))
    print(f"mean WER {report.mean_wer:.4f}  mean CER {report.mean_cer:.4f}")
    return 0


def cmd_selftest(args):
    return 0 if selftest.run_all(verbose=True) else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="sskit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", default=None)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=os.cpu_count())
        p.add_argument("--desk-scale", action="store_true")

    p = sub.add_parser("featurize"); common(p)
    p.add_argument("--manifest", required=True); p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("augment-preview"); common(p)
    p.add_argument("--manifest", required=True); p.set_defaults(func=cmd_augment_preview)

    p = sub.add_parser("train-asr"); common(p)
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--valid-manifest", required=True)
    p.set_defaults(func=cmd_train_asr)

    p = sub.add_parser("decode"); common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("ingest-hypotheses"); common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--hyps", required=True)
    p.set_defaults(func=cmd_ingest_hypotheses)

    p = sub.add_parser("train-lm"); common(p)
    p.add_argument("--manifest", required=True); p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("train-sentiment"); common(p)
    p.add_argument("--lm", required=True)
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--valid-manifest", required=True)
    p.add_argument("--text-source", default="ground_truth")
    p.set_defaults(func=cmd_train_sentiment)

    p = sub.add_parser("fuse"); common(p)
    p.add_argument("--predictions", nargs="+", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate"); common(p)
    p.add_argument("--refs", required=True)
    p.add_argument("--hyps", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("selftest"); common(p)
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SSK_LOG_LEVEL", "INFO"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as e:
        log.error("%s", e)
        return 1
    except Exception as e:  # runtime failure
        log.exception("runtime failure: %s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
