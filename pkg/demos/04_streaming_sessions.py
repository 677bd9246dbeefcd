"""
Streaming sessions and the offline-equivalence contract
=======================================================

Feed a call turn by turn through a session with bounded context buffers and
confirm the verdicts match offline inference bit for bit; then meter
per-turn latency.
"""
from dbdkit import (
    Architecture, AudioSpec, CorpusSpec, EncoderConfig, FrontendConfig,
    ModelConfig, TurnsPerCall, build_model, feed_turn, generate_synthetic_corpus,
    measure_latency, open_session, set_global_seed,
)

calls = generate_synthetic_corpus(CorpusSpec(
    n_calls=3, turns_per_call=TurnsPerCall(12, 1), breakdown_rate=1.0,
    audio=AudioSpec(sample_rate=8000, duration_mean_s=0.5, duration_stdev_s=0.1),
    seed=5))

set_global_seed(0)
model = build_model(ModelConfig(
    architecture=Architecture.MULTCONDB,
    encoder=EncoderConfig(conv_channels=16, conv_kernel=5, conv_layers=2,
                          hidden_dim=8, context_window=5, attention_dim=8,
                          dropout=0.0),
    frontend=FrontendConfig(audio_dim=12, text_dim=12, target_duration_s=0.6,
                            sample_rate=8000))).eval()

call = calls[0]
offline = model.predict_call(call)

session = open_session(model)
mismatches = 0
for turn, off in zip(call.turns, offline):
    verdict, session = feed_turn(session, turn)
    if verdict.score != off.score:     # bitwise comparison, not approximate
        mismatches += 1
    assert all(n <= 5 for n in session.buffer_lengths().values())
print(f"streamed {len(call.turns)} turns; bitwise mismatches vs offline: {mismatches}")
print(f"context buffers held at: {session.buffer_lengths()}")

summary = measure_latency(model, calls)
print(f"latency over {summary.n_turns} turns [{summary.frontend} frontend]: "
      f"mean {summary.mean_ms:.2f} ms, p50 {summary.p50_ms:.2f} ms, "
      f"p95 {summary.p95_ms:.2f} ms")
