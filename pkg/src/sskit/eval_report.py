"""WER/CER metrics, classification scores and diagnostic report tables.

CER is computed over characters with all whitespace removed from both
sides; WER over whitespace-separated tokens.  Both normalize by the
reference length, so insert-heavy hypotheses can score above 1.0.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

NEGATIVE = "negative"
POSITIVE = "positive"


def edit_distance(a, b) -> int:
    """Levenshtein distance with unit costs between two symbol sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1,
                           cur[j - 1] + 1,
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[len(b)]


def cer(ref: str, hyp: str) -> float:
    """Character error rate; whitespace is stripped from both sides first.

    Empty reference: 0.0 if the hypothesis is also empty, else 1.0.
    """
    r = "".join(ref.split())
    h = "".join(hyp.split())
    if not r:
        return 0.0 if not h else 1.0
    return edit_distance(r, h) / len(r)


def wer(ref: str, hyp: str) -> float:
    """Word error rate over whitespace tokens; empty-ref convention as cer."""
    r = ref.split()
    h = hyp.split()
    if not r:
        return 0.0 if not h else 1.0
    return edit_distance(r, h) / len(r)


def classification_metrics(labels, predictions) -> tuple[float, float]:
    """Accuracy and macro F1 over aligned label/prediction lists.

    A class absent from both labels and predictions contributes F1 = 0
    (with a warning) so the macro average stays comparable across runs.
    """
    if len(labels) != len(predictions):
        raise ValueError(
            f"length mismatch: {len(labels)} labels vs {len(predictions)} predictions")
    if not labels:
        raise ValueError("empty label list")
    accuracy = sum(l == p for l, p in zip(labels, predictions)) / len(labels)
    f1s = []
    for cls in (NEGATIVE, POSITIVE):
        tp = sum(1 for l, p in zip(labels, predictions) if l == cls and p == cls)
        fp = sum(1 for l, p in zip(labels, predictions) if l != cls and p == cls)
        fn = sum(1 for l, p in zip(labels, predictions) if l == cls and p != cls)
        if tp == 0 and fp == 0 and fn == 0:
            log.warning("class %r absent from labels and predictions; F1 set to 0", cls)
            f1s.append(0.0)
        elif tp == 0:
            f1s.append(0.0)
        else:
            prec = tp / (tp + fp)
            rec = tp / (tp + fn)
            f1s.append(2 * prec * rec / (prec + rec))
    return accuracy, sum(f1s) / len(f1s)


@dataclass
class UtteranceResult:
    id: str
    wer: float
    cer: float
    label: str | None = None
    prediction: str | None = None

    @property
    def correct(self) -> bool | None:
        if self.label is None or self.prediction is None:
            return None
        return self.label == self.prediction


@dataclass
class EvalReport:
    """Per-utterance rows plus aggregates and the CER-vs-accuracy table."""
    rows: list[UtteranceResult] = field(default_factory=list)

    @property
    def mean_wer(self) -> float:
        return sum(r.wer for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def mean_cer(self) -> float:
        return sum(r.cer for r in self.rows) / len(self.rows) if self.rows else 0.0

    def accuracy_f1(self) -> tuple[float, float] | None:
        scored = [r for r in self.rows if r.correct is not None]
        if not scored:
            return None
        return classification_metrics([r.label for r in scored],
                                      [r.prediction for r in scored])

    def to_json(self) -> str:
        agg: dict = {"mean_wer": self.mean_wer, "mean_cer": self.mean_cer}
        af = self.accuracy_f1()
        if af is not None:
            agg["accuracy"], agg["macro_f1"] = af
        return json.dumps({
            "utterances": [vars(r) for r in self.rows],
            "aggregate": agg,
            "cer_accuracy_histogram": cer_accuracy_histogram(self),
        }, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["id", "wer", "cer", "label", "prediction"])
        for r in self.rows:
            w.writerow([r.id, f"{r.wer:.6f}", f"{r.cer:.6f}",
                        r.label or "", r.prediction or ""])
        af = self.accuracy_f1()
        w.writerow(["__aggregate__", f"{self.mean_wer:.6f}", f"{self.mean_cer:.6f}",
                    "" if af is None else f"accuracy={af[0]:.4f}",
                    "" if af is None else f"macro_f1={af[1]:.4f}"])
        return buf.getvalue()


def cer_accuracy_histogram(report: EvalReport, bin_width: float = 0.10) -> list[dict]:
    """10%-wide CER bins with per-bin utterance count and accuracy.

    Utterances without a sentiment label/prediction still count toward the
    bin sizes; accuracy is over the scored subset of each bin.
    """
    bins: dict[int, list[UtteranceResult]] = {}
    for r in report.rows:
        bins.setdefault(int(math.floor(r.cer / bin_width)), []).append(r)
    table = []
    for idx in sorted(bins):
        rows = bins[idx]
        scored = [r for r in rows if r.correct is not None]
        table.append({
            "cer_low": idx * bin_width,
            "cer_high": (idx + 1) * bin_width,
            "count": len(rows),
            "accuracy": (sum(r.correct for r in scored) / len(scored)) if scored else None,
        })
    return table


def histogram_csv(table: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["cer_low", "cer_high", "count", "accuracy"])
    for row in table:
        acc = "" if row["accuracy"] is None else f"{row['accuracy']:.4f}"
        w.writerow([f"{row['cer_low']:.2f}", f"{row['cer_high']:.2f}", row["count"], acc])
    return buf.getvalue()
