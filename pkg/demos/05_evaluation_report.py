"""WER/CER metrics and the CER-vs-accuracy diagnostic table.

Run with: python demos/05_evaluation_report.py
"""

import random

from sskit.eval_report import (EvalReport, UtteranceResult, cer,
                               cer_accuracy_histogram, histogram_csv, wer)
from sskit.synth import corrupt_text, make_sentiment_corpus

# CER ignores whitespace entirely, so dropped word boundaries are free;
# WER pays for every token.
pairs = [("i hated it", "i haved i"),
         ("it was terrible", "ws terrible i"),
         ("the film was great", "the film was great")]
for ref, hyp in pairs:
    print(f"{ref!r:>24} vs {hyp!r:<20} "
          f"WER {wer(ref, hyp):.3f}  CER {cer(ref, hyp):.3f}")

# Simulate hypotheses with varying damage and bucket sentiment accuracy by
# CER: accuracy should decay as recognition degrades.
rng = random.Random(0)
report = EvalReport()
for i, (text, label) in enumerate(make_sentiment_corpus(300, seed=1)):
    rate = rng.uniform(0.0, 0.5)
    hyp = corrupt_text(text, rate, rng)
    # crude keyword classifier standing in for the sentiment model
    positive_hits = sum(w in hyp for w in ("good", "great", "lovely", "superb",
                                           "delight", "charming", "wonderful",
                                           "uplifting"))
    negative_hits = sum(w in hyp for w in ("bad", "awful", "boring", "dreadful",
                                           "gross", "painful", "terrible",
                                           "dismal"))
    prediction = "positive" if positive_hits >= negative_hits else "negative"
    report.rows.append(UtteranceResult(f"u{i}", wer(text, hyp), cer(text, hyp),
                                       label=label, prediction=prediction))

accuracy, macro_f1 = report.accuracy_f1()
print(f"\nmean WER {report.mean_wer:.3f}  mean CER {report.mean_cer:.3f}  "
      f"accuracy {accuracy:.3f}  macro F1 {macro_f1:.3f}")
print("\naccuracy by 10%-wide CER bin:")
print(histogram_csv(cer_accuracy_histogram(report)))
