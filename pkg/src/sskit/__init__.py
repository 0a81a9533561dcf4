"""Spoken sentiment toolkit.

A CTC-trained recurrent speech recognizer whose character hypotheses feed
a character-level recurrent sentiment encoder, with acoustic-feature and
late-fusion branches, plus the WER/CER/accuracy evaluation harness needed
to quantify ASR-induced sentiment degradation.
"""

__version__ = "0.1.0"

from . import (asr_pipeline, audio_frontend, augment, corpus, ctc,
               eval_report, nn_core, sentiment, synth)

__all__ = ["asr_pipeline", "audio_frontend", "augment", "corpus", "ctc",
           "eval_report", "nn_core", "sentiment", "synth", "__version__"]
