"""Overfit the bi-LSTM CTC recognizer on a desk-scale tone corpus.

Takes ~15 s on a laptop CPU.  Run with: python demos/03_train_asr_desk.py
"""

from sskit.asr_pipeline import AsrConfig, decode_corpus, train_asr
from sskit.eval_report import EvalReport, UtteranceResult, cer, wer
from sskit.corpus import normalize_transcript
from sskit.synth import make_tone_corpus

utts = make_tone_corpus(20, seed=0, n_words=(1, 2), word_len=(2, 4))
print(f"{len(utts)} tone-coded utterances, e.g. "
      f"{[u.reference_text for u in utts[:3]]}")

config = AsrConfig(max_epochs=200, batch_size=2, stop_valid_cer=0.005)
bundle, train_log = train_asr(config, utts, utts)

print(f"\nepoch 1 ran in ascending duration order (SortaGrad); "
      f"first/last: {train_log.first_epoch_order[0]}, "
      f"{train_log.first_epoch_order[-1]}")
print("epoch  loss      CER      lr")
for row in train_log.rows[::5] + train_log.rows[-1:]:
    print(f"{row['epoch']:>5}  {row['train_loss']:<8.3f} "
          f"{row['valid_cer']:<8.4f} {row['lr']:.2e}")

report = EvalReport()
for u, hyp in zip(utts, decode_corpus(bundle, utts)):
    ref = normalize_transcript(u.reference_text)
    report.rows.append(UtteranceResult(u.id, wer(ref, hyp["text"]),
                                       cer(ref, hyp["text"])))
    marker = "" if hyp["text"] == ref else "   <- error"
    print(f"{u.id}: {ref!r} -> {hyp['text']!r}{marker}")
print(f"\nmean WER {report.mean_wer:.4f}  mean CER {report.mean_cer:.4f}")
