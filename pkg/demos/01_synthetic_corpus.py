"""
Synthetic corpora with controllable breakdown causes
=====================================================

Generate a labeled phone-call corpus, inspect how each breakdown cause
manifests, split it call-level, and round-trip it through persistence.
"""
import numpy as np

from dbdkit import (
    AudioSpec, Cause, CorpusSpec, Label, SignalChannel, TurnsPerCall,
    format_e2e_input, format_utterance, generate_synthetic_corpus,
    load_corpus, save_corpus, split_corpus,
)
from dbdkit.corpus import e2e_context

spec = CorpusSpec(
    n_calls=20,
    turns_per_call=TurnsPerCall(mean=16, stdev=2),
    breakdown_rate=1.0,
    cause_mix={Cause.SILENCE: 1 / 3, Cause.INTERRUPTION: 1 / 3,
               Cause.SKIPPED_ACTION: 1 / 3},
    audio=AudioSpec(sample_rate=8000, duration_mean_s=0.6, duration_stdev_s=0.15),
    signal_channels=frozenset(SignalChannel),  # text + structure + audio
    seed=7,
)
calls = generate_synthetic_corpus(spec)
print(f"{len(calls)} calls, {sum(len(c.turns) for c in calls)} turns")

# Every selected call carries exactly one labeled breakdown turn with a cause.
for cause in Cause:
    example = next(c for c in calls
                   for t in c.turns if t.cause is cause)
    bt = next(t for t in example.turns if t.label is Label.BREAKDOWN)
    prev = example.turns[bt.index - 1]
    rms = float(np.sqrt(np.mean(bt.waveform.samples ** 2)))
    print(f"\n--- {cause.value} (call {example.id}, turn {bt.index}, "
          f"waveform rms {rms:.4f})")
    print("  prev:", format_utterance(prev))
    print("  this:", format_utterance(bt))

# The model input formats: single-utterance and start-token context framing.
call = calls[0]
print("\nE2E input for turn 6:")
print(" ", format_e2e_input(call.turns[6], e2e_context(call, 6))[:160], "...")

# Call-level splitting is deterministic per seed and partitions the corpus.
split = split_corpus(calls, (0.7, 0.2, 0.1), seed=0)
print(f"\nsplit sizes: {len(split.train)}/{len(split.validation)}/{len(split.test)}")

# Persistence: one call per line plus WAV sidecars; round-trips exactly.
path = save_corpus(calls, "runs/demo_corpus/corpus.jsonl")
assert load_corpus(path) == calls
print(f"round-trip OK: {path}")
