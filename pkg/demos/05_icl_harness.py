"""
In-context-learning harness with mock clients
=============================================

Build budget-packed prompts from example calls, parse free-form answers, and
score turn-level F1 across seeds - here with mock completion clients (a
perfect oracle and an always-refusing client) standing in for a vendor API.
"""
from dbdkit import (
    AudioSpec, CorpusSpec, OracleClient, RefusingClient, TurnsPerCall,
    approx_token_count, build_prompt, evaluate_icl, format_call_for_prompt,
    generate_synthetic_corpus, parse_answer, split_corpus,
)
from dbdkit.icl import gold_breakdown_turn

calls = generate_synthetic_corpus(CorpusSpec(
    n_calls=30, turns_per_call=TurnsPerCall(12, 1), breakdown_rate=1.0,
    audio=AudioSpec(sample_rate=8000, duration_mean_s=0.4, duration_stdev_s=0.05),
    seed=17))
split = split_corpus(calls, (0.7, 0.2, 0.1), seed=0)

print("one call, prompt-formatted:")
print(" ", format_call_for_prompt(split.test[0])[:140], "...")

examples = [(c, gold_breakdown_turn(c)) for c in split.train[:8]]
bundle = build_prompt(examples, split.test[0], budget_tokens=32000, n_requested=8)
print(f"\npacked {bundle.included_example_count} examples, "
      f"~{bundle.token_estimate} tokens (budget 32000)")

tight = build_prompt(examples, split.test[0], budget_tokens=2000, n_requested=8)
print(f"with a 2000-token budget only {tight.included_example_count} examples fit")

print("\nanswer parsing:")
for text in ("2", "I believe turn 7 is the breakdown.",
             "There is no dialogue breakdown in this conversation."):
    print(f"  {text!r} -> {parse_answer(text, call_length=12)}")

rows = evaluate_icl(OracleClient.for_calls(split.test), split.train, split.test,
                    n_examples=[0, 2, 4], seeds=tuple(range(11)))
print("\noracle client (upper bound):")
for row in rows:
    print(f"  n={row.n_examples}: mean F1 {row.mean_f1:.3f} "
          f"[p25 {row.p25_f1:.3f}, p75 {row.p75_f1:.3f}]")

rows = evaluate_icl(RefusingClient(), split.train, split.test,
                    n_examples=[2], seeds=tuple(range(11)))
print(f"refusing client (lower bound): mean F1 {rows[0].mean_f1:.3f}")
print(f"\ntoken estimate for 'hello' ({len('hello')} chars):",
      approx_token_count("hello"))
